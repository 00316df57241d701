//! Ensemble pipelines shared by the subcommands and the acceptance suite.

use anyhow::{bail, Result};
use spdelab::ensemble::{flat_setup, pam_setup, run_ensemble, EnsembleOutput, EnsembleRequest};
use spdelab::ensemble_stats::{
    kde_density, ks_statistic, rate_fit, self_normalize, solve_volterra, sup_distance, tv_distance, variance_check,
    Bandwidth, DensityEstimate, Moments, RateFit, VarianceOracle, VarianceReport, MIN_SAMPLES,
};
use spdelab::kernel_core::flat_unit_variance;
use spdelab::malliavin_probe::{stein_report, stein_samples, SteinIngredients};
use spdelab::spde_engine::{CaseTag, Scheme, Window};

use crate::config::{Normalizer, RunConfig};

pub struct Setup {
    pub scheme: Box<dyn Scheme>,
    pub windows: Vec<Window>,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    Ok(match cfg.case {
        CaseTag::Flat => {
            let (s, w) = flat_setup(&cfg.r_ladder, cfg.t_end, cfg.dx)?;
            Setup {
                scheme: Box::new(s),
                windows: w,
            }
        }
        CaseTag::Pam => {
            let (s, w) = pam_setup(&cfg.r_ladder, cfg.t_end, cfg.dx)?;
            Setup {
                scheme: Box::new(s),
                windows: w,
            }
        }
    })
}

pub fn run(cfg: &RunConfig, setup: &Setup, tangents: bool) -> Result<EnsembleOutput> {
    let coeff = cfg.coefficient()?;
    Ok(run_ensemble(&EnsembleRequest {
        scheme: setup.scheme.as_ref(),
        coeff: &coeff,
        windows: &setup.windows,
        tangents,
        record: None,
        seed: cfg.seed,
        first_replica: 0,
        replicas: cfg.replicas,
        workers: cfg.workers,
    })?)
}

/// Standard deviation used to normalize S for window `i`.
pub fn normalizer(cfg: &RunConfig, setup: &Setup, i: usize, s: &[f64]) -> Result<f64> {
    let w = &setup.windows[i];
    Ok(match cfg.normalizer {
        Normalizer::Sample => Moments::from_slice(s).std_dev(),
        Normalizer::Quadrature => flat_unit_variance(w.r, cfg.t_end)?.sqrt(),
        Normalizer::Discrete => w.unit_variance(setup.scheme.as_ref()).sqrt(),
    })
}

pub fn normalized(cfg: &RunConfig, setup: &Setup, i: usize, s: &[f64]) -> Result<Vec<f64>> {
    if cfg.normalizer == Normalizer::Sample {
        return Ok(self_normalize(s));
    }
    let n = normalizer(cfg, setup, i, s)?;
    Ok(s.iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone)]
pub struct LadderRow {
    pub r: f64,
    pub n_replicas: usize,
    pub sample_var: f64,
    pub sup_dist: f64,
    pub tv_dist: f64,
    pub ks: f64,
    pub density: Option<DensityEstimate>,
    pub variance: Option<VarianceReport>,
}

/// Variance oracle target for the configured coefficient, when one is known.
fn variance_report(cfg: &RunConfig, r: f64, var: f64) -> Result<Option<VarianceReport>> {
    let t = cfg.t_end;
    let rep = match (cfg.case, cfg.preset.as_str()) {
        (CaseTag::Pam, _) => variance_check(var, r, t, CaseTag::Pam, VarianceOracle::None)?,
        (CaseTag::Flat, "constant-1") => {
            variance_check(var, r, t, CaseTag::Flat, VarianceOracle::Target(flat_unit_variance(r, t)? / r))?
        }
        (CaseTag::Flat, "identity") => {
            let sol = solve_volterra(t, 2000)?;
            variance_check(var, r, t, CaseTag::Flat, VarianceOracle::Xi(&|s| sol.eval(s)))?
        }
        _ => return Ok(None),
    };
    Ok(Some(rep))
}

/// Per-R statistics; with `strict` a ladder point with too few samples is an error,
/// otherwise its distances are reported as NaN.
pub fn ladder_rows(cfg: &RunConfig, setup: &Setup, out: &EnsembleOutput, strict: bool) -> Result<Vec<LadderRow>> {
    let mut rows = Vec::new();
    for (i, w) in setup.windows.iter().enumerate() {
        let s = out.s_samples(i);
        let sample_var = Moments::from_slice(&s).variance();
        let (sup_dist, tv_dist, ks, density) = if s.len() >= MIN_SAMPLES {
            let f = normalized(cfg, setup, i, &s)?;
            let d = kde_density(&f, Bandwidth::Default)?;
            (sup_distance(&d), tv_distance(&d), ks_statistic(&f), Some(d))
        } else if strict {
            bail!("R = {}: {} valid replicas, need at least {MIN_SAMPLES}", w.r, s.len());
        } else {
            (f64::NAN, f64::NAN, f64::NAN, None)
        };
        rows.push(LadderRow {
            r: w.r,
            n_replicas: s.len(),
            sample_var,
            sup_dist,
            tv_dist,
            ks,
            density,
            variance: variance_report(cfg, w.r, sample_var)?,
        });
    }
    Ok(rows)
}

pub fn fit(points: impl Iterator<Item = (f64, f64)>) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = points.collect();
    rate_fit(&pts).ok()
}

#[derive(Debug, Clone)]
pub struct SteinRow {
    pub r: f64,
    pub ingredients: SteinIngredients,
    pub sup_dist: f64,
    /// replicas with D_vF < −1e-6 · max|D_vF|
    pub negative_fraction: f64,
}

impl SteinRow {
    pub fn rhs(&self) -> Option<f64> {
        self.ingredients.rhs_stein_raw
    }

    /// LHS ≤ 1.5 · rhs, when the right side exists.
    pub fn consistent(&self) -> Option<bool> {
        self.rhs().map(|rhs| self.sup_dist <= 1.5 * rhs)
    }
}

pub fn stein_rows(cfg: &RunConfig, setup: &Setup, out: &EnsembleOutput) -> Result<Vec<SteinRow>> {
    let mut rows = Vec::new();
    for (i, w) in setup.windows.iter().enumerate() {
        let s = out.s_samples(i);
        if s.len() < MIN_SAMPLES {
            bail!("R = {}: {} valid replicas, need at least {MIN_SAMPLES}", w.r, s.len());
        }
        let norm = normalizer(cfg, setup, i, &s)?;
        let samples = stein_samples(out, i, norm);
        let scale = samples.iter().fold(0.0f64, |m, x| m.max(x.dvf.abs()));
        let tol = 1e-6 * scale;
        let ingredients = stein_report(&samples, tol)?;
        let negative = samples.iter().filter(|x| x.dvf < -tol).count();
        let f: Vec<f64> = samples.iter().map(|x| x.f).collect();
        let d = kde_density(&f, Bandwidth::Default)?;
        rows.push(SteinRow {
            r: w.r,
            ingredients,
            sup_dist: sup_distance(&d),
            negative_fraction: negative as f64 / samples.len() as f64,
        });
    }
    Ok(rows)
}
