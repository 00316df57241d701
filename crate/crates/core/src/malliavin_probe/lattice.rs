use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::noise_field::{NoiseSource, NoiseTape};
use crate::spde_engine::{path_window, CaseTag, CoefficientSpec, FieldPath, Scheme};

/// Quadrature lattice for the r-side of the double projection; the s-side always runs over
/// the full grid by superposition. With `row_superposition` (the default) every node of an
/// r time row is injected into one field, which is exact in space because the fields are
/// linear in the anchor mass; `space_points` then only matters for point anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLattice {
    pub time_points: usize,
    pub space_points: usize,
    /// use every grid cell as an r-anchor with weight dt·dx
    pub full: bool,
    /// include pairs on the same time step (weight 1 instead of 2)
    pub include_same_step: bool,
    /// superpose every spatial node of a time row into one field (exact in space)
    pub row_superposition: bool,
    pub budget: f64,
}

impl Default for AnchorLattice {
    fn default() -> Self {
        AnchorLattice {
            time_points: 6,
            space_points: 6,
            full: false,
            include_same_step: true,
            row_superposition: true,
            budget: 2e10,
        }
    }
}

impl AnchorLattice {
    pub fn coarse(time_points: usize, space_points: usize) -> Self {
        AnchorLattice {
            time_points,
            space_points,
            ..Default::default()
        }
    }

    pub fn full() -> Self {
        AnchorLattice {
            full: true,
            ..Default::default()
        }
    }
}

/// Trapezoid weights (in units of cells) for nodes spread over the index range [lo, hi].
fn index_rule(lo: usize, hi: usize, points: usize) -> Vec<(usize, f64)> {
    let span = hi - lo;
    let mut idx: Vec<usize> = (0..points.max(2))
        .map(|i| lo + ((i * span) as f64 / (points.max(2) - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    if idx.len() == 1 {
        return vec![(idx[0], (span + 1) as f64)];
    }
    let m = idx.len();
    (0..m)
        .map(|i| {
            let left = if i == 0 { 0.5 } else { 0.5 * (idx[i] - idx[i - 1]) as f64 };
            let right = if i + 1 == m { 0.5 } else { 0.5 * (idx[i + 1] - idx[i]) as f64 };
            (idx[i], left + right)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvDvF {
    pub value: f64,
    pub anchors: usize,
    pub cost: f64,
}

/// D_v(D_vF) for one replica: Σ_r W_r v_r [D_r v · DF + v · D_r DF] with the s-integral done
/// by superposed linear fields over the whole grid.
pub fn dv_dvf(
    path: &FieldPath,
    coeff: &CoefficientSpec,
    tape: &NoiseTape,
    r: f64,
    normalizer: f64,
    lattice: &AnchorLattice,
) -> Result<DvDvF> {
    tape.check_matches(&path.grid, path.key)?;
    if !(normalizer > 0.0) {
        return domain("normalizer must be positive");
    }
    let grid = path.grid;
    let t = path.time(grid.n_t);
    if r > grid.l - 6.0 * grid.t_end.sqrt() + 1e-9 {
        return domain(format!("R = {r} exceeds L − 6√t for this grid"));
    }
    let coeff = match path.case {
        CaseTag::Flat => coeff.clone(),
        CaseTag::Pam => CoefficientSpec::identity(),
    };
    let (n, nt) = (grid.n_x, grid.n_t);
    let (dx, dt) = (grid.dx(), grid.dt());

    // each source is one time row with its (node, weight) injections
    let sources: Vec<(usize, Vec<(usize, f64)>)> = if lattice.full {
        if lattice.row_superposition {
            (0..nt).map(|k| (k, (0..n).map(|j| (j, dt * dx)).collect())).collect()
        } else {
            (0..nt)
                .flat_map(|k| (0..n).map(move |j| (k, vec![(j, dt * dx)])))
                .collect()
        }
    } else {
        let zmax = r + 3.0 * t.sqrt();
        let lo = grid.node(-zmax);
        let hi = grid.node(zmax);
        let times = index_rule(0, nt - 1, lattice.time_points);
        if lattice.row_superposition {
            times
                .iter()
                .map(|&(k, wt)| (k, (0..n).map(|j| (j, wt * dt * dx)).collect()))
                .collect()
        } else {
            let space = index_rule(lo, hi, lattice.space_points);
            times
                .iter()
                .flat_map(|&(k, wt)| space.iter().map(move |&(j, wx)| (k, vec![(j, wt * dt * wx * dx)])))
                .collect()
        }
    };
    let anchors = &sources;
    let cost = anchors.len() as f64 * nt as f64 * n as f64 * 4.0;
    if cost > lattice.budget {
        return Err(Error::Budget {
            estimate: cost,
            budget: lattice.budget,
        });
    }

    let win = path_window(path, r)?;
    let scheme = path.scheme();
    let g = scheme.gain(0);
    let mut xi = vec![0.0; nt * n];
    let mut reader = tape.reader();
    for k in 0..nt {
        reader.fill(k, &mut xi[k * n..(k + 1) * n]);
    }
    let mut sg = vec![0.0; nt * n];
    let mut sp = vec![0.0; nt * n];
    let mut spp = vec![0.0; nt * n];
    // a_s = W_s φ_s σ_s with φ the discrete adjoint weight
    let mut a = vec![0.0; nt * n];
    for k in 0..nt {
        let u = path.slice(k);
        for j in 0..n {
            let (v0, v1, v2) = coeff.eval3(u[j]);
            let c = k * n + j;
            sg[c] = v0;
            sp[c] = v1;
            spp[c] = v2;
            a[c] = dt * dx * win.noise_weights[k][j] / (dx * normalizer) * v0;
        }
    }

    let dot = |w: &[f64], f: &[f64]| w.iter().zip(f).map(|(x, y)| x * y).sum::<f64>();
    let contributions: Vec<Result<f64>> = anchors
        .par_iter()
        .map(|(m, inj)| {
            let m = *m;
            // injected mass W_r v_r σ_r / dx per node
            let inj: Vec<(usize, f64)> = inj
                .iter()
                .map(|&(i, wr)| {
                    let vr = win.noise_weights[m][i] / (dx * normalizer) * sg[m * n + i];
                    (i, wr * vr * sg[m * n + i] / dx)
                })
                .filter(|(_, v)| *v != 0.0)
                .collect();
            if inj.is_empty() {
                return Ok(0.0);
            }
            let mut d = vec![0.0; n];
            let mut h = vec![0.0; n];
            let mut h1 = vec![0.0; n];
            let mut g2 = vec![0.0; n];
            let mut nd = vec![0.0; n];
            let mut nh = vec![0.0; n];
            let mut nh1 = vec![0.0; n];
            let mut ng2 = vec![0.0; n];
            for k in m..nt {
                scheme.heat_step(&d, &mut nd);
                scheme.heat_step(&h, &mut nh);
                scheme.heat_step(&h1, &mut nh1);
                scheme.heat_step(&g2, &mut ng2);
                let c = if k > m {
                    2.0
                } else if lattice.include_same_step {
                    1.0
                } else {
                    0.0
                };
                let row = k * n;
                for j in 0..n {
                    let q = row + j;
                    let gx = g * xi[q];
                    nd[j] += gx * sp[q] * d[j];
                    nh[j] += gx * sp[q] * h[j] + c * a[q] * sg[q] / dx;
                    nh1[j] += gx * sp[q] * h1[j] + a[q] * sp[q] * d[j] / dx;
                    ng2[j] += gx * (sp[q] * g2[j] + spp[q] * d[j] * h[j]) + c * a[q] * sp[q] * d[j] / dx;
                }
                if k == m {
                    for &(i, v) in &inj {
                        nd[i] += v;
                    }
                }
                std::mem::swap(&mut d, &mut nd);
                std::mem::swap(&mut h, &mut nh);
                std::mem::swap(&mut h1, &mut nh1);
                std::mem::swap(&mut g2, &mut ng2);
            }
            let val = dot(&win.weights, &h1) + dot(&win.weights, &g2);
            if !val.is_finite() {
                return Err(Error::Diverged {
                    step: nt,
                    node: inj[0].0,
                    value: val,
                });
            }
            Ok(val)
        })
        .collect();
    let mut value = 0.0;
    for c in contributions {
        value += c?;
    }
    Ok(DvDvF {
        value: value / normalizer,
        anchors: anchors.len(),
        cost,
    })
}
