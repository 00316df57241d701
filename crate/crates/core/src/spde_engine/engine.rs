//! Single-replica co-simulation of the solution and its directional Malliavin derivatives.

use crate::error::{domain, Error, Result};
use crate::noise_field::NoiseSource;

use super::coeff::CoefficientSpec;
use super::scheme::{Scheme, Scratch};

pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Spatial window Q_R on the final-time grid together with its adjoint noise weights.
///
/// `noise_weights[k]` is C_kᵀ (B A)_{k+1..}ᵀ w: the sensitivity of w·X_N to the noise
/// term injected at step k. The discrete direction v is γ_k σ(Y_k) ⊙ noise_weights[k].
#[derive(Debug, Clone)]
pub struct Window {
    pub r: f64,
    pub weights: Vec<f64>,
    pub centering: f64,
    pub noise_weights: Vec<Vec<f64>>,
}

/// Trapezoid weights for [-R, R] on the final grid (R snapped to the spacing).
pub fn trapezoid_weights(scheme: &dyn Scheme, r: f64) -> Result<(Vec<f64>, f64)> {
    let h = scheme.final_spacing();
    let n = scheme.width();
    let m = (r / h).round();
    if (m * h - r).abs() > 1e-6 * r.max(1.0) {
        return domain(format!("R = {r} is not a multiple of the grid spacing {h}"));
    }
    let m = m as usize;
    let c = n / 2;
    if m == 0 || m >= c {
        return domain(format!("R = {r} does not fit inside the grid"));
    }
    let mut w = vec![0.0; n];
    for v in w.iter_mut().take(c + m).skip(c - m + 1) {
        *v = h;
    }
    w[c - m] = 0.5 * h;
    w[c + m] = 0.5 * h;
    Ok((w, m as f64 * h))
}

impl Window {
    pub fn new(scheme: &dyn Scheme, r: f64) -> Result<Window> {
        let (w, r_eff) = trapezoid_weights(scheme, r)?;
        Ok(Self::with_weights(scheme, r_eff, w, 2.0 * r_eff))
    }

    pub fn with_weights(scheme: &dyn Scheme, r: f64, weights: Vec<f64>, centering: f64) -> Window {
        let mut ws = scheme.new_scratch();
        let mut psi = weights.clone();
        let mut noise_weights = vec![Vec::new(); scheme.steps()];
        for k in (0..scheme.steps()).rev() {
            noise_weights[k] = scheme.adjoint(k, &mut psi, &mut ws);
        }
        Window {
            r,
            weights,
            centering,
            noise_weights,
        }
    }

    /// Σ_k γ_k² |noise_weights[k]|²: the variance of w·X_N when σ ≡ 1.
    pub fn unit_variance(&self, scheme: &dyn Scheme) -> f64 {
        self.noise_weights
            .iter()
            .enumerate()
            .map(|(k, nw)| scheme.gain(k).powi(2) * nw.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Per-replica raw outputs. For window i: `s[i]` = w·X_N − centering, `a[i]` = w·Z_N and
/// `b[i]` = w·(Z2_N + Zk_N), all computed with the unnormalized direction. With a
/// normalizer σ: F = s/σ, D_vF = a/σ², D_v(D_vF) = b/σ³.
#[derive(Debug, Clone, Default)]
pub struct ReplicaOutcome {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub records: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RecordSpec {
    /// state indices (0 = initial, k = after k steps); values are emitted in increasing step
    /// order whatever the order of this list
    pub steps: Vec<usize>,
    pub nodes: Vec<usize>,
}

pub struct Engine<'a> {
    pub scheme: &'a dyn Scheme,
    pub coeff: &'a CoefficientSpec,
    pub windows: &'a [Window],
    pub tangents: bool,
    pub record: Option<&'a RecordSpec>,
}

pub struct EngineBuffers {
    fields: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
    xi: Vec<f64>,
    sg: Vec<f64>,
    sp: Vec<f64>,
    spp: Vec<f64>,
    ws: Scratch,
}

impl<'a> Engine<'a> {
    pub fn n_fields(&self) -> usize {
        if self.tangents {
            1 + 2 * self.windows.len()
        } else {
            1
        }
    }

    pub fn buffers(&self) -> EngineBuffers {
        let n = self.scheme.width();
        EngineBuffers {
            fields: vec![vec![0.0; n]; self.n_fields()],
            noise: vec![vec![0.0; n]; self.n_fields()],
            xi: vec![0.0; n],
            sg: vec![0.0; n],
            sp: vec![0.0; n],
            spp: vec![0.0; n],
            ws: self.scheme.new_scratch(),
        }
    }

    fn record(&self, k: usize, x: &[f64], out: &mut Vec<f64>) {
        if let Some(rec) = self.record {
            if rec.steps.contains(&k) {
                out.extend(rec.nodes.iter().map(|&j| x[j]));
            }
        }
    }

    pub fn run(&self, source: &mut dyn NoiseSource, buf: &mut EngineBuffers) -> Result<ReplicaOutcome> {
        let scheme = self.scheme;
        let n = scheme.width();
        let nw = self.windows.len();
        buf.fields[0].copy_from_slice(&scheme.initial());
        for f in buf.fields.iter_mut().skip(1) {
            f.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut out = ReplicaOutcome::default();
        self.record(0, &buf.fields[0], &mut out.records);
        let constant = self.coeff.is_constant();

        for k in 0..scheme.steps() {
            scheme.pre(k, &mut buf.fields, &mut buf.ws);
            source.fill(k, &mut buf.xi);
            let g = scheme.gain(k);
            {
                let y = &buf.fields[0];
                for j in 0..n {
                    let (a, b, c) = self.coeff.eval3(y[j]);
                    buf.sg[j] = a;
                    buf.sp[j] = b;
                    buf.spp[j] = c;
                }
            }
            for j in 0..n {
                buf.noise[0][j] = g * buf.sg[j] * buf.xi[j];
            }
            if self.tangents {
                for (i, win) in self.windows.iter().enumerate() {
                    let psi = &win.noise_weights[k];
                    let (zi, zsi) = (1 + 2 * i, 2 + 2 * i);
                    if constant {
                        for j in 0..n {
                            let h = g * buf.sg[j] * psi[j];
                            buf.noise[zi][j] = g * buf.sg[j] * h;
                            buf.noise[zsi][j] = 0.0;
                        }
                        continue;
                    }
                    for j in 0..n {
                        let zy = buf.fields[zi][j];
                        let zsy = buf.fields[zsi][j];
                        let xi = buf.xi[j];
                        let (sg, sp, spp) = (buf.sg[j], buf.sp[j], buf.spp[j]);
                        let h = g * sg * psi[j];
                        let kk = g * sp * zy * psi[j];
                        buf.noise[zi][j] = g * (sp * zy * xi + sg * h);
                        buf.noise[zsi][j] = g * (spp * zy * zy * xi + sp * zsy * xi + 2.0 * sp * zy * h + sg * kk);
                    }
                }
            }
            scheme.post(k, &mut buf.fields, &buf.noise, &mut buf.ws);
            for (j, v) in buf.fields[0].iter().enumerate() {
                if !(v.abs() <= DIVERGENCE_LIMIT) {
                    return Err(Error::Diverged {
                        step: k + 1,
                        node: j,
                        value: *v,
                    });
                }
            }
            self.record(k + 1, &buf.fields[0], &mut out.records);
        }

        let dot = |w: &[f64], f: &[f64]| w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        for (i, win) in self.windows.iter().enumerate() {
            out.s.push(dot(&win.weights, &buf.fields[0]) - win.centering);
            if self.tangents {
                out.a.push(dot(&win.weights, &buf.fields[1 + 2 * i]));
                out.b.push(dot(&win.weights, &buf.fields[2 + 2 * i]));
            }
        }
        debug_assert!(out.s.len() == nw);
        Ok(out)
    }
}
