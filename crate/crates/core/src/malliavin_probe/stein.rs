use crate::ensemble::EnsembleOutput;
use crate::error::{domain, Result};

/// Per-replica F, D_vF and (when computed) D_v(D_vF).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinSample {
    pub f: f64,
    pub dvf: f64,
    pub dvdvf: Option<f64>,
}

pub const WINSOR_FRACTION: f64 = 1e-3;
pub const MAX_NONPOSITIVE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SteinIngredients {
    pub n: usize,
    pub norm_f_4: f64,
    /// ‖(D_vF)^{-1}‖₄ over the replicas with D_vF > 0
    pub norm_inv_dvf_4_raw: f64,
    /// same with the smallest 0.1% of D_vF clipped up to their quantile
    pub norm_inv_dvf_4_winsorized: f64,
    pub norm_one_minus_dvf_2: f64,
    pub norm_dvdvf_2: Option<f64>,
    pub rhs_stein_raw: Option<f64>,
    pub rhs_stein_winsorized: Option<f64>,
    pub nonpositive: usize,
    pub inverse_valid: bool,
}

fn lp(xs: impl Iterator<Item = f64>, p: i32) -> f64 {
    let mut n = 0usize;
    let mut acc = 0.0;
    for x in xs {
        acc += x.abs().powi(p);
        n += 1;
    }
    (acc / n as f64).powf(1.0 / p as f64)
}

fn assemble(f4: f64, inv4: f64, om2: f64, dd2: f64) -> f64 {
    (f4 * inv4 + 2.0) * om2 + inv4 * inv4 * dd2
}

/// Empirical norms of the Stein bound and the assembled right-hand side (raw and winsorized).
/// `tol` is the positivity tolerance for D_vF (pass 0 to treat every D_vF ≤ 0 as nonpositive).
pub fn stein_report(samples: &[SteinSample], tol: f64) -> Result<SteinIngredients> {
    if samples.is_empty() {
        return domain("stein_report needs at least one replica");
    }
    let n = samples.len();
    let nonpositive = samples.iter().filter(|s| s.dvf <= -tol.abs() || s.dvf == 0.0).count();
    let inverse_valid = (nonpositive as f64) <= MAX_NONPOSITIVE_FRACTION * n as f64;
    let norm_f_4 = lp(samples.iter().map(|s| s.f), 4);
    let norm_one_minus_dvf_2 = lp(samples.iter().map(|s| 1.0 - s.dvf), 2);

    let mut pos: Vec<f64> = samples.iter().map(|s| s.dvf).filter(|v| *v > 0.0).collect();
    pos.sort_by(|a, b| a.total_cmp(b));
    let (raw, wins) = if pos.is_empty() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let raw = lp(pos.iter().map(|v| 1.0 / v), 4);
        let k = ((WINSOR_FRACTION * pos.len() as f64).floor() as usize).min(pos.len() - 1);
        let floor = pos[k];
        let wins = lp(pos.iter().map(|v| 1.0 / v.max(floor)), 4);
        (raw, wins)
    };
    let norm_inv_dvf_4_raw = if inverse_valid { raw } else { f64::NAN };
    let norm_inv_dvf_4_winsorized = if inverse_valid { wins } else { f64::NAN };

    let norm_dvdvf_2 = if samples.iter().all(|s| s.dvdvf.is_some()) {
        Some(lp(samples.iter().map(|s| s.dvdvf.unwrap_or(0.0)), 2))
    } else {
        None
    };
    let rhs = |inv: f64| {
        norm_dvdvf_2
            .filter(|_| inverse_valid)
            .map(|dd| assemble(norm_f_4, inv, norm_one_minus_dvf_2, dd))
    };
    Ok(SteinIngredients {
        n,
        norm_f_4,
        norm_inv_dvf_4_raw,
        norm_inv_dvf_4_winsorized,
        norm_one_minus_dvf_2,
        norm_dvdvf_2,
        rhs_stein_raw: rhs(raw),
        rhs_stein_winsorized: rhs(wins),
        nonpositive,
        inverse_valid,
    })
}

/// Converts raw engine outputs for one window into Stein samples with normalizer σ̂:
/// F = s/σ̂, D_vF = a/σ̂², D_v(D_vF) = b/σ̂³. Aborted replicas are skipped.
pub fn stein_samples(out: &EnsembleOutput, window: usize, normalizer: f64) -> Vec<SteinSample> {
    let s = out.s_samples(window);
    let a = out.a_samples(window);
    let b = out.b_samples(window);
    let n2 = normalizer * normalizer;
    s.iter()
        .zip(&a)
        .zip(&b)
        .filter(|((f, _), _)| f.is_finite())
        .map(|((f, dvf), dd)| SteinSample {
            f: f / normalizer,
            dvf: dvf / n2,
            dvdvf: Some(dd / (n2 * normalizer)),
        })
        .collect()
}
