use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel_core::norm_cdf;

pub const GRID_LO: f64 = -5.0;
pub const GRID_HI: f64 = 5.0;
pub const GRID_STEP: f64 = 0.01;
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// 0.9 · min(sd, IQR/1.34) · n^{-1/5}
    Default,
    Fixed(f64),
}

pub fn eval_grid() -> Vec<f64> {
    let n = ((GRID_HI - GRID_LO) / GRID_STEP).round() as usize;
    (0..=n).map(|i| GRID_LO + i as f64 * GRID_STEP).collect()
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < s.len() {
        s[i] * (1.0 - f) + s[i + 1] * f
    } else {
        s[i]
    }
}

pub fn default_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    0.9 * sd.min(iqr / 1.34) * n.powf(-0.2)
}

/// Gaussian-kernel density at `xs`; exact sums for small samples, fine linear binning otherwise.
pub fn kde_eval(samples: &[f64], h: f64, xs: &[f64]) -> Vec<f64> {
    let n = samples.len() as f64;
    let norm = 1.0 / (n * h * (2.0 * PI).sqrt());
    if samples.len() * xs.len() <= 20_000_000 {
        return xs
            .iter()
            .map(|&x| {
                samples
                    .iter()
                    .map(|&y| {
                        let z = (x - y) / h;
                        (-0.5 * z * z).exp()
                    })
                    .sum::<f64>()
                    * norm
            })
            .collect();
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let reach = 8.0 * h;
    let delta = h / 50.0;
    let b0 = lo - reach;
    let nb = ((hi + reach - b0) / delta).ceil() as usize + 2;
    let mut counts = vec![0.0; nb];
    for &y in samples {
        let pos = (y - b0) / delta;
        if pos < 0.0 || pos >= (nb - 1) as f64 {
            continue;
        }
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        counts[i] += 1.0 - f;
        counts[i + 1] += f;
    }
    let kw = (reach / delta).ceil() as isize;
    let kern: Vec<f64> = (-kw..=kw)
        .map(|k| {
            let z = k as f64 * delta / h;
            (-0.5 * z * z).exp()
        })
        .collect();
    xs.iter()
        .map(|&x| {
            // x is not on the bin lattice in general: interpolate between neighbouring lattice points
            let pos = (x - b0) / delta;
            let i = pos.floor() as isize;
            let f = pos - i as f64;
            let at = |c: isize| -> f64 {
                let mut acc = 0.0;
                for (t, kv) in kern.iter().enumerate() {
                    let b = c + t as isize - kw;
                    if b >= 0 && (b as usize) < nb {
                        acc += counts[b as usize] * kv;
                    }
                }
                acc
            };
            ((1.0 - f) * at(i) + f * at(i + 1)) * norm
        })
        .collect()
}

pub fn kde_density(samples: &[f64], bw: Bandwidth) -> Result<DensityEstimate> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            have: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite sample".into()));
    }
    let h = match bw {
        Bandwidth::Default => default_bandwidth(samples),
        Bandwidth::Fixed(h) => h,
    };
    if !(h > 0.0) {
        return Err(Error::Degenerate(format!("bandwidth {h} (identical samples?)")));
    }
    let grid = eval_grid();
    let density = kde_eval(samples, h, &grid);
    Ok(DensityEstimate {
        grid,
        density,
        bandwidth: h,
        n: samples.len(),
    })
}

/// Wraps an analytic density sampled on the standard grid.
pub fn analytic_density(f: impl Fn(f64) -> f64) -> DensityEstimate {
    let grid = eval_grid();
    let density = grid.iter().map(|&x| f(x)).collect();
    DensityEstimate {
        grid,
        density,
        bandwidth: 0.0,
        n: 0,
    }
}

pub fn sup_distance(d: &DensityEstimate) -> f64 {
    d.grid
        .iter()
        .zip(&d.density)
        .map(|(&x, &f)| (f - std_normal_pdf(x)).abs())
        .fold(0.0, f64::max)
}

pub fn tv_distance(d: &DensityEstimate) -> f64 {
    let diffs: Vec<f64> = d
        .grid
        .iter()
        .zip(&d.density)
        .map(|(&x, &f)| (f - std_normal_pdf(x)).abs())
        .collect();
    let mut acc = 0.0;
    for w in d.grid.windows(2).zip(diffs.windows(2)) {
        acc += 0.5 * (w.0[1] - w.0[0]) * (w.1[0] + w.1[1]);
    }
    0.5 * acc
}

/// Kolmogorov–Smirnov statistic against N(0,1).
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = norm_cdf(x);
            (c - i as f64 / n).max((i + 1) as f64 / n - c)
        })
        .fold(0.0, f64::max)
}
