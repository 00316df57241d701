use crate::error::{domain, Error, Result};
use crate::kernel_core::p;
use crate::noise_field::{NoiseSource, NoiseTape};
use crate::spde_engine::{CaseTag, CoefficientSpec, FieldPath, Scheme, DIVERGENCE_LIMIT};

/// Noise cell (step, node): perturbing the noise at step `s_step` moves the state at `s_step + 1`.
/// A second-order anchor also carries the earlier cell (r_step, z_node).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub s_step: usize,
    pub y_node: usize,
    pub pair: Option<(usize, usize)>,
}

impl Anchor {
    pub fn first(s_step: usize, y_node: usize) -> Self {
        Anchor {
            s_step,
            y_node,
            pair: None,
        }
    }

    pub fn pair(r_step: usize, z_node: usize, s_step: usize, y_node: usize) -> Result<Self> {
        if r_step >= s_step {
            return domain(format!("anchor pair needs r < s, got steps {r_step} and {s_step}"));
        }
        Ok(Anchor {
            s_step,
            y_node,
            pair: Some((r_step, z_node)),
        })
    }

    fn check(&self, path: &FieldPath) -> Result<()> {
        let g = &path.grid;
        if self.s_step == 0 || self.s_step >= g.n_t || self.y_node >= g.n_x {
            return domain(format!(
                "anchor ({}, {}) is not strictly inside the grid",
                self.s_step, self.y_node
            ));
        }
        if let Some((r, z)) = self.pair {
            if r == 0 || r >= self.s_step || z >= g.n_x {
                return domain(format!("anchor pair ({r}, {z}) is not valid"));
            }
        }
        Ok(())
    }
}

/// D u (order 1) or D D u (order 2) on the whole grid, zero before the anchor takes effect.
/// Values are kept for u; `value` divides by p_τ(x) for the pam case.
#[derive(Debug, Clone)]
pub struct DerivativeField {
    pub anchor: Anchor,
    pub order: u8,
    pub case: CaseTag,
    n_x: usize,
    t0: f64,
    dt: f64,
    l: f64,
    dx: f64,
    values: Vec<f64>,
}

impl DerivativeField {
    pub fn u_slice(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_x..(n + 1) * self.n_x]
    }

    pub fn u_value(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.n_x + j]
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn value(&self, n: usize, j: usize) -> f64 {
        let v = self.u_value(n, j);
        match self.case {
            CaseTag::Flat => v,
            CaseTag::Pam => {
                let tau = self.time(n);
                if tau <= 0.0 {
                    0.0
                } else {
                    v / p(tau, -self.l + j as f64 * self.dx)
                }
            }
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len() / self.n_x - 1
    }
}

fn coeff_for(path: &FieldPath, coeff: &CoefficientSpec) -> CoefficientSpec {
    match path.case {
        CaseTag::Flat => coeff.clone(),
        CaseTag::Pam => CoefficientSpec::identity(),
    }
}

/// Evolves a linear field through the replayed noise. `inject(k)` returns the injection
/// landing at slice k+1; `source(k, out)` adds the extra multiplicative source σ''·… at step k.
pub(crate) fn evolve_linear(
    path: &FieldPath,
    coeff: &CoefficientSpec,
    tape: &NoiseTape,
    start: usize,
    mut step_extra: impl FnMut(usize, &[f64], &[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let grid = path.grid;
    let n = grid.n_x;
    let scheme = path.scheme();
    let g = scheme.gain(0);
    let mut values = vec![0.0; (grid.n_t + 1) * n];
    let mut xi = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut reader = tape.reader();
    for k in start..grid.n_t {
        reader.fill(k, &mut xi);
        let u = path.slice(k);
        let cur = &values[k * n..(k + 1) * n];
        scheme.heat_step(cur, &mut next);
        for j in 0..n {
            next[j] += g * coeff.sigma_prime(u[j]) * cur[j] * xi[j];
        }
        step_extra(k, &xi, cur, &mut next);
        for (j, v) in next.iter().enumerate() {
            if !(v.abs() <= DIVERGENCE_LIMIT) {
                return Err(Error::Diverged {
                    step: k + 1,
                    node: j,
                    value: *v,
                });
            }
        }
        values[(k + 1) * n..(k + 2) * n].copy_from_slice(&next);
    }
    Ok(values)
}

pub fn first_derivative_field(
    path: &FieldPath,
    coeff: &CoefficientSpec,
    tape: &NoiseTape,
    anchor: Anchor,
) -> Result<DerivativeField> {
    tape.check_matches(&path.grid, path.key)?;
    anchor.check(path)?;
    let coeff = coeff_for(path, coeff);
    let dx = path.grid.dx();
    let (s, y) = (anchor.s_step, anchor.y_node);
    let mass = coeff.sigma(path.slice(s)[y]) / dx;
    let values = evolve_linear(path, &coeff, tape, s, |k, _, _, next| {
        if k == s {
            next[y] += mass;
        }
    })?;
    Ok(DerivativeField {
        anchor: Anchor::first(s, y),
        order: 1,
        case: path.case,
        n_x: path.grid.n_x,
        t0: path.start_time(),
        dt: path.grid.dt(),
        l: path.grid.l,
        dx,
        values,
    })
}

/// D_{r,z} D_{s,y} u given the already computed first field for (r, z).
pub fn second_derivative_field(
    path: &FieldPath,
    coeff: &CoefficientSpec,
    tape: &NoiseTape,
    r_field: &DerivativeField,
    s_anchor: Anchor,
) -> Result<DerivativeField> {
    if r_field.order != 1 {
        return domain("second_derivative_field needs a first-order field for (r, z)");
    }
    let (r, z) = (r_field.anchor.s_step, r_field.anchor.y_node);
    let anchor = Anchor::pair(r, z, s_anchor.s_step, s_anchor.y_node)?;
    anchor.check(path)?;
    let s_field = first_derivative_field(path, coeff, tape, Anchor::first(anchor.s_step, anchor.y_node))?;
    let coeff = coeff_for(path, coeff);
    let n = path.grid.n_x;
    let g = path.scheme().gain(0);
    let dx = path.grid.dx();
    let (s, y) = (anchor.s_step, anchor.y_node);
    let mass = coeff.sigma_prime(path.slice(s)[y]) * r_field.u_value(s, y) / dx;
    let values = evolve_linear(path, &coeff, tape, s, |k, xi, _, next| {
        if k == s {
            next[y] += mass;
        }
        let u = path.slice(k);
        let dr = r_field.u_slice(k);
        let ds = s_field.u_slice(k);
        for j in 0..n {
            let spp = coeff.sigma_second(u[j]);
            if spp != 0.0 {
                next[j] += g * spp * dr[j] * ds[j] * xi[j];
            }
        }
    })?;
    Ok(DerivativeField {
        anchor,
        order: 2,
        case: path.case,
        n_x: n,
        t0: path.start_time(),
        dt: path.grid.dt(),
        l: path.grid.l,
        dx,
        values,
    })
}
