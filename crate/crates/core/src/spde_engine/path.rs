use crate::error::{domain, Error, Result};
use crate::kernel_core::p;
use crate::noise_field::{GridSpec, NoiseSource, NoiseTape, StreamKey, TapeStorage};

use super::coeff::CoefficientSpec;
use super::engine::{trapezoid_weights, Window, DIVERGENCE_LIMIT};
use super::scheme::{FdInit, FdScheme, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    Flat,
    Pam,
}

impl CaseTag {
    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::Flat => "flat",
            CaseTag::Pam => "pam",
        }
    }
}

impl std::str::FromStr for CaseTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(CaseTag::Flat),
            "pam" => Ok(CaseTag::Pam),
            other => domain(format!("unknown case '{other}' (expected flat or pam)")),
        }
    }
}

/// Full discrete trajectory of one replica.
#[derive(Debug, Clone)]
pub struct FieldPath {
    pub grid: GridSpec,
    pub key: StreamKey,
    pub case: CaseTag,
    pub init: FdInit,
    values: Vec<f64>,
    ratio: Option<Vec<f64>>,
}

impl FieldPath {
    pub fn slice(&self, n: usize) -> &[f64] {
        let w = self.grid.n_x;
        &self.values[n * w..(n + 1) * w]
    }

    /// U slices (pam only); `None` at n = 0 where U is undefined off the origin.
    pub fn ratio_slice(&self, n: usize) -> Option<&[f64]> {
        let w = self.grid.n_x;
        match (&self.ratio, self.start_time()) {
            (Some(r), t0) if n > 0 || t0 > 0.0 => Some(&r[n * w..(n + 1) * w]),
            _ => None,
        }
    }

    pub fn start_time(&self) -> f64 {
        match self.init {
            FdInit::Smoothed { t0 } => t0,
            _ => 0.0,
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        self.start_time() + n as f64 * self.grid.dt()
    }

    pub fn scheme(&self) -> FdScheme {
        FdScheme::new(self.grid, self.init)
    }

    /// Final-time field used in spatial averages: u (flat) or U (pam).
    pub fn final_field(&self) -> &[f64] {
        match self.case {
            CaseTag::Flat => self.slice(self.grid.n_t),
            CaseTag::Pam => self.ratio_slice(self.grid.n_t).expect("pam path has ratio slices"),
        }
    }
}

fn tape_is_zero(tape: &NoiseTape) -> bool {
    match &tape.storage {
        TapeStorage::InMemory(d) => d.iter().all(|v| *v == 0.0),
        TapeStorage::Regenerable => false,
    }
}

fn run_fd(grid: GridSpec, init: FdInit, coeff: &CoefficientSpec, tape: &NoiseTape) -> Result<Vec<f64>> {
    let scheme = FdScheme::new(grid, init);
    let n = grid.n_x;
    let g = scheme.gain(0);
    let mut values = Vec::with_capacity((grid.n_t + 1) * n);
    values.extend(scheme.initial());
    let mut reader = tape.reader();
    let mut xi = vec![0.0; n];
    let mut next = vec![0.0; n];
    for k in 0..grid.n_t {
        reader.fill(k, &mut xi);
        let cur = &values[k * n..(k + 1) * n];
        scheme.heat_step(cur, &mut next);
        for j in 0..n {
            next[j] += g * coeff.sigma(cur[j]) * xi[j];
            if !(next[j].abs() <= DIVERGENCE_LIMIT) {
                return Err(Error::Diverged {
                    step: k + 1,
                    node: j,
                    value: next[j],
                });
            }
        }
        values.extend_from_slice(&next);
    }
    Ok(values)
}

/// Case 1: flat initial data, u^{n+1} = P u^n + σ(u^n) ξ^n √(dt/dx).
pub fn solve_case1(grid: GridSpec, coeff: &CoefficientSpec, tape: &NoiseTape) -> Result<FieldPath> {
    if tape.grid != grid {
        return Err(Error::TapeMismatch("tape grid differs from solver grid".into()));
    }
    let values = run_fd(grid, FdInit::Flat, coeff, tape)?;
    Ok(FieldPath {
        grid,
        key: tape.key,
        case: CaseTag::Flat,
        init: FdInit::Flat,
        values,
        ratio: None,
    })
}

/// Case 2 with σ(u) = u and a single-node Dirac initial condition.
pub fn solve_case2_pam(grid: GridSpec, tape: &NoiseTape) -> Result<FieldPath> {
    solve_case2_pam_with(grid, tape, FdInit::Delta)
}

pub fn solve_case2_pam_with(grid: GridSpec, tape: &NoiseTape, init: FdInit) -> Result<FieldPath> {
    if tape.grid != grid {
        return Err(Error::TapeMismatch("tape grid differs from solver grid".into()));
    }
    if init == FdInit::Flat {
        return domain("the pam solver needs a Dirac or smoothed initial condition");
    }
    let values = run_fd(grid, init, &CoefficientSpec::identity(), tape)?;
    let n = grid.n_x;
    let mut path = FieldPath {
        grid,
        key: tape.key,
        case: CaseTag::Pam,
        init,
        values,
        ratio: None,
    };
    if tape_is_zero(tape) {
        let dx = grid.dx();
        for k in 0..=grid.n_t {
            let mass: f64 = path.slice(k).iter().sum::<f64>() * dx;
            if (mass - 1.0).abs() > 0.05 {
                return domain(format!("noiseless mass drifted to {mass} at step {k}"));
            }
        }
    }
    let mut ratio = vec![f64::NAN; (grid.n_t + 1) * n];
    for k in 0..=grid.n_t {
        let t = path.time(k);
        if t <= 0.0 {
            continue;
        }
        for j in 0..n {
            ratio[k * n + j] = path.values[k * n + j] / p(t, grid.x(j));
        }
    }
    path.ratio = Some(ratio);
    Ok(path)
}

/// Result of the single-pass tangent equation.
#[derive(Debug, Clone)]
pub struct TangentState {
    pub grid: GridSpec,
    /// Z(t,·), scaled so that (1/normalizer)·w·z_values = projection
    pub z_values: Vec<f64>,
    pub projection: f64,
    pub normalizer: f64,
}

/// Window over Q_R for a path: u-weights (flat) or u/p_t weights so that w·u = ∫_{Q_R} U (pam).
pub fn path_window(path: &FieldPath, r: f64) -> Result<Window> {
    let scheme = path.scheme();
    let (mut w, r_eff) = trapezoid_weights(&scheme, r)?;
    if path.case == CaseTag::Pam {
        let t = path.time(path.grid.n_t);
        for (j, v) in w.iter_mut().enumerate() {
            if *v != 0.0 {
                *v /= p(t, path.grid.x(j));
            }
        }
    }
    Ok(Window::with_weights(&scheme, r_eff, w, 2.0 * r_eff))
}

/// ⟨DF, v⟩ (flat) or ⟨DG, w⟩ (pam) by one linear tangent pass over the replayed tape.
pub fn tangent_projection(
    path: &FieldPath,
    coeff: &CoefficientSpec,
    tape: &NoiseTape,
    r: f64,
    normalizer: f64,
) -> Result<TangentState> {
    tape.check_matches(&path.grid, path.key)?;
    if !(normalizer > 0.0) {
        return domain("normalizer must be positive");
    }
    if r > path.grid.l - 6.0 * path.grid.t_end.sqrt() + 1e-9 {
        return domain(format!("R = {r} exceeds L − 6√t for this grid"));
    }
    let coeff = match path.case {
        CaseTag::Flat => coeff.clone(),
        CaseTag::Pam => CoefficientSpec::identity(),
    };
    let scheme = path.scheme();
    let win = path_window(path, r)?;
    let n = path.grid.n_x;
    let g = scheme.gain(0);
    let mut z = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut reader = tape.reader();
    for k in 0..path.grid.n_t {
        reader.fill(k, &mut xi);
        let u = path.slice(k);
        let psi = &win.noise_weights[k];
        scheme.heat_step(&z, &mut next);
        for j in 0..n {
            let (sg, sp, _) = coeff.eval3(u[j]);
            let h = g * sg * psi[j];
            next[j] += g * (sp * z[j] * xi[j] + sg * h);
        }
        std::mem::swap(&mut z, &mut next);
    }
    let a: f64 = win.weights.iter().zip(&z).map(|(w, v)| w * v).sum();
    Ok(TangentState {
        grid: path.grid,
        z_values: z.iter().map(|v| v / normalizer).collect(),
        projection: a / (normalizer * normalizer),
        normalizer,
    })
}

/// (∫_{Q_R} field(t_end) − centering)/normalizer with trapezoid weights on the grid.
pub fn spatial_average(path: &FieldPath, r: f64, normalizer: f64, centering: f64) -> Result<f64> {
    if r > path.grid.l {
        return domain(format!("R = {r} lies outside the truncated domain"));
    }
    let (w, _) = trapezoid_weights(&path.scheme(), r)?;
    let f = path.final_field();
    let s: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
    Ok((s - centering) / normalizer)
}
