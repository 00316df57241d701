use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::kernel_core::{big_phi, p, SecondDerivArgs};
use crate::noise_field::{sample_tape, GridSpec, Lane, StreamKey};
use crate::spde_engine::{solve_case1, solve_case2_pam, CaseTag, CoefficientSpec, FieldPath};

use super::fields::{first_derivative_field, second_derivative_field, Anchor};

/// Empirical moment of a derivative field at the final time against its kernel bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRatio {
    /// (r, z) for second-order probes
    pub pair: Option<(f64, f64)>,
    pub s: f64,
    pub y: f64,
    pub x: f64,
    pub norm: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct BoundSweep {
    pub grid: GridSpec,
    pub case: CaseTag,
    pub coeff: CoefficientSpec,
    pub seed: u64,
    pub replicas: usize,
    /// (s, y) for first-order probes; second-order probes use (r, z, s, y)
    pub anchors: Vec<(f64, f64)>,
    pub pairs: Vec<(f64, f64, f64, f64)>,
    pub evals: Vec<f64>,
}

fn step_of(path_t0: f64, dt: f64, t: f64, nt: usize) -> Result<usize> {
    let k = ((t - path_t0) / dt).round();
    if k < 1.0 || k as usize >= nt {
        return domain(format!("anchor time {t} is not strictly inside the grid"));
    }
    Ok(k as usize)
}

fn solve(sweep: &BoundSweep, rep: usize) -> Result<(FieldPath, crate::noise_field::NoiseTape)> {
    let key = StreamKey::new(sweep.seed, rep as u64, Lane::Derivative);
    let tape = sample_tape(sweep.grid, key)?;
    let path = match sweep.case {
        CaseTag::Flat => solve_case1(sweep.grid, &sweep.coeff, &tape)?,
        CaseTag::Pam => solve_case2_pam(sweep.grid, &tape)?,
    };
    Ok((path, tape))
}

/// Effective anchor time: the perturbation enters the state one step after its noise cell.
fn eff(path: &FieldPath, k: usize) -> f64 {
    path.time(k + 1)
}

fn reduce(per_rep: Vec<Result<Vec<f64>>>, p_exp: i32) -> Result<Vec<f64>> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for r in per_rep {
        let v = r?;
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x.abs().powi(p_exp);
        }
        n += 1;
    }
    Ok(acc.into_iter().map(|a| (a / n as f64).powf(1.0 / p_exp as f64)).collect())
}

/// ‖D_{s,y}u(t,x)‖₄ (or ‖D_{s,y}U‖₄) against p_{t−s}(x−y) (flat) or p_{s(t−s)/t}(y − s x/t) (pam).
pub fn first_order_ratios(sweep: &BoundSweep) -> Result<Vec<BoundRatio>> {
    let g = sweep.grid;
    let per_rep: Vec<Result<Vec<f64>>> = (0..sweep.replicas)
        .into_par_iter()
        .map(|rep| {
            let (path, tape) = solve(sweep, rep)?;
            let mut out = Vec::new();
            for &(s, y) in &sweep.anchors {
                let k = step_of(path.start_time(), g.dt(), s, g.n_t)?;
                let f = first_derivative_field(&path, &sweep.coeff, &tape, Anchor::first(k, g.node(y)))?;
                for &x in &sweep.evals {
                    out.push(f.value(g.n_t, g.node(x)));
                }
            }
            Ok(out)
        })
        .collect();
    let norms = reduce(per_rep, 4)?;
    let probe = solve(sweep, 0)?.0;
    let t = probe.time(g.n_t);
    let mut res = Vec::new();
    let mut it = norms.into_iter();
    for &(s, y) in &sweep.anchors {
        let k = step_of(probe.start_time(), g.dt(), s, g.n_t)?;
        let (se, ye) = (eff(&probe, k), g.x(g.node(y)));
        for &x in &sweep.evals {
            let xe = g.x(g.node(x));
            let bound = match sweep.case {
                CaseTag::Flat => p(t - se, xe - ye),
                CaseTag::Pam => p(se * (t - se) / t, ye - se / t * xe),
            };
            let norm = it.next().unwrap_or(f64::NAN);
            res.push(BoundRatio {
                pair: None,
                s: se,
                y: ye,
                x: xe,
                norm,
                bound,
                ratio: norm / bound,
            });
        }
    }
    Ok(res)
}

/// ‖D_{r,z}D_{s,y}u(t,x)‖₂ against Φ (flat) or the product-kernel bound (pam).
pub fn second_order_ratios(sweep: &BoundSweep) -> Result<Vec<BoundRatio>> {
    let g = sweep.grid;
    let per_rep: Vec<Result<Vec<f64>>> = (0..sweep.replicas)
        .into_par_iter()
        .map(|rep| {
            let (path, tape) = solve(sweep, rep)?;
            let mut out = Vec::new();
            for &(r, z, s, y) in &sweep.pairs {
                let kr = step_of(path.start_time(), g.dt(), r, g.n_t)?;
                let ks = step_of(path.start_time(), g.dt(), s, g.n_t)?;
                let fr = first_derivative_field(&path, &sweep.coeff, &tape, Anchor::first(kr, g.node(z)))?;
                let f2 = second_derivative_field(&path, &sweep.coeff, &tape, &fr, Anchor::first(ks, g.node(y)))?;
                for &x in &sweep.evals {
                    out.push(f2.value(g.n_t, g.node(x)));
                }
            }
            Ok(out)
        })
        .collect();
    let norms = reduce(per_rep, 2)?;
    let probe = solve(sweep, 0)?.0;
    let t = probe.time(g.n_t);
    let mut res = Vec::new();
    let mut it = norms.into_iter();
    for &(r, z, s, y) in &sweep.pairs {
        let kr = step_of(probe.start_time(), g.dt(), r, g.n_t)?;
        let ks = step_of(probe.start_time(), g.dt(), s, g.n_t)?;
        let (re, se) = (eff(&probe, kr), eff(&probe, ks));
        let (ze, ye) = (g.x(g.node(z)), g.x(g.node(y)));
        for &x in &sweep.evals {
            let xe = g.x(g.node(x));
            let bound = match sweep.case {
                CaseTag::Flat => big_phi(&SecondDerivArgs::new(re, ze, se, ye, t, xe)?),
                CaseTag::Pam => p(se * (t - se) / t, ye - se / t * xe) * p(re * (se - re) / se, ze - re / se * ye),
            };
            let norm = it.next().unwrap_or(f64::NAN);
            res.push(BoundRatio {
                pair: Some((re, ze)),
                s: se,
                y: ye,
                x: xe,
                norm,
                bound,
                ratio: norm / bound,
            });
        }
    }
    Ok(res)
}

pub fn max_ratio(rs: &[BoundRatio]) -> f64 {
    rs.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max)
}
