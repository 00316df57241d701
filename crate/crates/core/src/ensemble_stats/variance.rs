use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::spde_engine::CaseTag;

/// Numerical solution of f(s) = 1 + ∫_0^s f(r)/√(4π(s−r)) dr on a uniform grid
/// (product trapezoid rule with exact weights against the singular kernel).
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub h: f64,
    pub values: Vec<f64>,
}

pub fn solve_volterra(t_max: f64, n: usize) -> Result<VolterraSolution> {
    if !(t_max > 0.0) || n < 2 {
        return domain("Volterra solver needs t_max > 0 and n ≥ 2");
    }
    let h = t_max / n as f64;
    let c = 1.0 / (4.0 * PI).sqrt();
    let sh = h.sqrt();
    // per-interval weights for lag m: (on the older node, on the newer node)
    let w: Vec<(f64, f64)> = (0..n)
        .map(|m| {
            let m = m as f64;
            let i0 = 2.0 * sh * ((m + 1.0).sqrt() - m.sqrt());
            let i1 = 2.0 / 3.0 * h * sh * ((m + 1.0).powf(1.5) - m.powf(1.5));
            (c / h * (i1 - m * h * i0), c / h * ((m + 1.0) * h * i0 - i1))
        })
        .collect();
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        let mut acc = 1.0;
        for j in 0..k {
            let m = k - j - 1;
            // interval [s_j, s_{j+1}]: older node j is further from s_k
            acc += w[m].0 * f[j];
            if j + 1 < k {
                acc += w[m].1 * f[j + 1];
            }
        }
        f[k] = acc / (1.0 - w[0].1);
    }
    Ok(VolterraSolution { h, values: f })
}

impl VolterraSolution {
    pub fn eval(&self, s: f64) -> f64 {
        let pos = (s / self.h).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let f = pos - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// ∫_0^t f by the trapezoid rule on the solution grid.
    pub fn integral(&self, t: f64) -> f64 {
        let k = ((t / self.h).round() as usize).min(self.values.len() - 1);
        let v = &self.values[..=k];
        self.h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[k]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub case: CaseTag,
    pub r: f64,
    pub t: f64,
    pub sample_variance: f64,
    /// σ²/R (flat) or Σ²/(R log R) (pam)
    pub ratio: f64,
    /// 2∫_0^t ξ(s)ds (flat) or 2t (pam)
    pub target: f64,
    pub rel_dev: f64,
}

pub enum VarianceOracle<'a> {
    /// ξ(s) = E[σ(u(s,0))²]
    Xi(&'a dyn Fn(f64) -> f64),
    /// precomputed 2∫ξ or any other target
    Target(f64),
    None,
}

pub fn variance_check(sample_variance: f64, r: f64, t: f64, case: CaseTag, oracle: VarianceOracle) -> Result<VarianceReport> {
    let (ratio, target) = match case {
        CaseTag::Flat => {
            let target = match oracle {
                VarianceOracle::Xi(xi) => 2.0 * integrate(xi, 0.0, t, QuadOptions::rel(1e-10))?.value,
                VarianceOracle::Target(v) => v,
                VarianceOracle::None => return domain("flat variance check needs a ξ oracle"),
            };
            (sample_variance / r, target)
        }
        CaseTag::Pam => {
            let target = match oracle {
                VarianceOracle::Target(v) => v,
                _ => 2.0 * t,
            };
            (sample_variance / (r * r.ln()), target)
        }
    };
    Ok(VarianceReport {
        case,
        r,
        t,
        sample_variance,
        ratio,
        target,
        rel_dev: (ratio - target) / target,
    })
}
