//! Linear-in-noise time steppers.
//!
//! Every scheme has the form
//!   Y_k = A_k X_k,   X_{k+1} = B_k Y_k + C_k (γ_k σ(Y_k) ⊙ ξ_k)
//! with deterministic linear maps A, B, C, which is all the tangent machinery needs.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Result};
use crate::kernel_core::p;
use crate::noise_field::GridSpec;

#[derive(Default)]
pub struct Scratch {
    pub tmp: Vec<f64>,
    buf: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
}

pub trait Scheme: Sync + Send {
    fn width(&self) -> usize;
    fn steps(&self) -> usize;
    fn initial(&self) -> Vec<f64>;
    fn gain(&self, k: usize) -> f64;
    fn new_scratch(&self) -> Scratch;
    /// fields ← A_k fields
    fn pre(&self, k: usize, fields: &mut [Vec<f64>], ws: &mut Scratch);
    /// fields[i] ← B_k fields[i] + C_k noise[i]
    fn post(&self, k: usize, fields: &mut [Vec<f64>], noise: &[Vec<f64>], ws: &mut Scratch);
    /// Replaces `psi` (weights on X_{k+1}) by the weights on X_k and returns C_kᵀ psi.
    fn adjoint(&self, k: usize, psi: &mut Vec<f64>, ws: &mut Scratch) -> Vec<f64>;
    /// Cell size of the final-time spatial grid.
    fn final_spacing(&self) -> f64;
    /// Coordinate of final-time node j.
    fn final_coord(&self, j: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdInit {
    /// u₀ ≡ 1
    Flat,
    /// single-node mass 1/dx at x = 0
    Delta,
    /// p_{t0}(x) data, the run then represents time t0 + n dt
    Smoothed { t0: f64 },
}

/// Explicit Euler finite differences on a periodic grid.
#[derive(Debug, Clone)]
pub struct FdScheme {
    pub grid: GridSpec,
    pub init: FdInit,
    lambda: f64,
    gain: f64,
}

impl FdScheme {
    pub fn new(grid: GridSpec, init: FdInit) -> Self {
        let dx = grid.dx();
        let dt = grid.dt();
        FdScheme {
            grid,
            init,
            lambda: dt / (2.0 * dx * dx),
            gain: (dt / dx).sqrt(),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// out ← P y
    pub fn heat_step(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        let l = self.lambda;
        out[0] = y[0] + l * (y[1] - 2.0 * y[0] + y[n - 1]);
        for j in 1..n - 1 {
            out[j] = y[j] + l * (y[j + 1] - 2.0 * y[j] + y[j - 1]);
        }
        out[n - 1] = y[n - 1] + l * (y[0] - 2.0 * y[n - 1] + y[n - 2]);
    }
}

impl Scheme for FdScheme {
    fn width(&self) -> usize {
        self.grid.n_x
    }
    fn steps(&self) -> usize {
        self.grid.n_t
    }
    fn initial(&self) -> Vec<f64> {
        let g = &self.grid;
        match self.init {
            FdInit::Flat => vec![1.0; g.n_x],
            FdInit::Delta => {
                let mut v = vec![0.0; g.n_x];
                v[g.center()] = 1.0 / g.dx();
                v
            }
            FdInit::Smoothed { t0 } => (0..g.n_x).map(|j| p(t0, g.x(j))).collect(),
        }
    }
    fn gain(&self, _k: usize) -> f64 {
        self.gain
    }
    fn new_scratch(&self) -> Scratch {
        Scratch {
            tmp: vec![0.0; self.grid.n_x],
            ..Default::default()
        }
    }
    fn pre(&self, _k: usize, _fields: &mut [Vec<f64>], _ws: &mut Scratch) {}
    fn post(&self, _k: usize, fields: &mut [Vec<f64>], noise: &[Vec<f64>], ws: &mut Scratch) {
        for (f, nz) in fields.iter_mut().zip(noise) {
            self.heat_step(f, &mut ws.tmp);
            for (t, v) in ws.tmp.iter_mut().zip(nz) {
                *t += v;
            }
            std::mem::swap(f, &mut ws.tmp);
        }
    }
    fn adjoint(&self, _k: usize, psi: &mut Vec<f64>, ws: &mut Scratch) -> Vec<f64> {
        let noise = psi.clone();
        self.heat_step(psi, &mut ws.tmp);
        std::mem::swap(psi, &mut ws.tmp);
        noise
    }
    fn final_spacing(&self) -> f64 {
        self.grid.dx()
    }
    fn final_coord(&self, j: usize) -> f64 {
        self.grid.x(j)
    }
}

/// Parameters of the ratio-frame solver for U(t,·) of the parabolic Anderson model.
///
/// V(τ,η) = U(τ, τη/t) solves dV = ½(t/τ)² ∂²_η V dτ + √(t/τ) V dW with V(0) = 1, so the
/// η-window [-R, R] at τ = t is exactly Q_R. Early times live on wide coarse periodic
/// grids that are halved (and refined) as the remaining smoothing length shrinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioFrameConfig {
    pub t: f64,
    pub n: usize,
    pub l_fin: f64,
    /// domain half-width / remaining smoothing length at each switch
    pub c_l: f64,
    /// start time as a fraction of t
    pub eps: f64,
    /// bound on the per-step multiplicative noise variance γ²
    pub g2_max: f64,
    pub dtau_max: f64,
}

impl RatioFrameConfig {
    /// Default resolution dη = 0.2 with final half-width ≥ 1.6 R_max.
    pub fn for_ladder(t: f64, r_max: f64) -> Self {
        Self::with_spacing(t, r_max, 0.2)
    }

    pub fn with_spacing(t: f64, r_max: f64, deta: f64) -> Self {
        let need = 2.0 * 1.6 * r_max / deta;
        let n = (need.ceil() as usize).next_power_of_two().max(64);
        RatioFrameConfig {
            t,
            n,
            l_fin: 0.5 * n as f64 * deta,
            c_l: 8.0,
            eps: 1e-10,
            g2_max: 0.1,
            dtau_max: t / 64.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RfStep {
    pub a: f64,
    pub b: f64,
    pub stage: usize,
    pub gain: f64,
    pub switch_after: bool,
}

pub struct RatioFrameScheme {
    pub cfg: RatioFrameConfig,
    pub half_widths: Vec<f64>,
    pub steps: Vec<RfStep>,
    mult_pre: Vec<Vec<f64>>,
    mult_post: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RatioFrameScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RatioFrameScheme")
            .field("cfg", &self.cfg)
            .field("stages", &self.half_widths.len())
            .field("steps", &self.steps.len())
            .finish()
    }
}

impl RatioFrameScheme {
    pub fn new(cfg: RatioFrameConfig) -> Result<Self> {
        let t = cfg.t;
        let n = cfg.n;
        if !(t > 0.0) || n < 16 || n % 4 != 0 || !(cfg.eps > 0.0 && cfg.eps < 1.0) {
            return domain("ratio frame needs t > 0, n ≥ 16 divisible by 4 and 0 < eps < 1");
        }
        let smooth = |tau: f64| t * t * (1.0 / tau - 1.0 / t);
        let tau0 = cfg.eps * t;
        let mut k_max = 0usize;
        while cfg.l_fin * 2f64.powi(k_max as i32) < cfg.c_l * smooth(tau0).sqrt() {
            k_max += 1;
        }
        let half_widths: Vec<f64> = (0..=k_max)
            .map(|k| cfg.l_fin * 2f64.powi((k_max - k) as i32))
            .collect();
        let switch_at: Vec<f64> = (0..k_max)
            .map(|k| 1.0 / ((half_widths[k + 1] / cfg.c_l).powi(2) / (t * t) + 1.0 / t))
            .collect();

        let mut steps = Vec::new();
        let mut a = tau0;
        let mut stage = 0usize;
        while a < t {
            let deta = 2.0 * half_widths[stage] / n as f64;
            let mut b = (a * (cfg.g2_max * deta / t).exp()).min(a + cfg.dtau_max).min(t);
            let mut switch_after = false;
            if stage < k_max && b >= switch_at[stage] {
                b = switch_at[stage];
                switch_after = true;
            }
            if t - b < 1e-12 * t {
                b = t;
            }
            let gain = (t * (b / a).ln() / deta).sqrt();
            steps.push(RfStep {
                a,
                b,
                stage,
                gain,
                switch_after,
            });
            if switch_after {
                stage += 1;
            }
            a = b;
        }

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let mult = |deta: f64, ds: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let f = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                    let kappa = 2.0 * PI * f / (n as f64 * deta);
                    (-0.5 * kappa * kappa * ds).exp() / n as f64
                })
                .collect()
        };
        let mut mult_pre = Vec::with_capacity(steps.len());
        let mut mult_post = Vec::with_capacity(steps.len());
        for st in &steps {
            let deta = 2.0 * half_widths[st.stage] / n as f64;
            let m = (st.a * st.b).sqrt();
            mult_pre.push(mult(deta, smooth(st.a) - smooth(m)));
            mult_post.push(mult(deta, smooth(m) - smooth(st.b)));
        }
        Ok(RatioFrameScheme {
            cfg,
            half_widths,
            steps,
            mult_pre,
            mult_post,
            fft,
            ifft,
        })
    }

    pub fn stages(&self) -> usize {
        self.half_widths.len()
    }

    fn heat(&self, mult: &[f64], fields: &mut [Vec<f64>], ws: &mut Scratch) {
        let n = self.cfg.n;
        let mut i = 0;
        while i < fields.len() {
            let pair = i + 1 < fields.len();
            for j in 0..n {
                ws.buf[j] = Complex::new(fields[i][j], if pair { fields[i + 1][j] } else { 0.0 });
            }
            self.fft.process_with_scratch(&mut ws.buf, &mut ws.fft_scratch);
            for (b, m) in ws.buf.iter_mut().zip(mult) {
                *b *= *m;
            }
            self.ifft.process_with_scratch(&mut ws.buf, &mut ws.fft_scratch);
            for j in 0..n {
                fields[i][j] = ws.buf[j].re;
            }
            if pair {
                for j in 0..n {
                    fields[i + 1][j] = ws.buf[j].im;
                }
            }
            i += 2;
        }
    }

    /// Restriction to the central half followed by linear refinement.
    fn switch(&self, f: &mut Vec<f64>, tmp: &mut Vec<f64>) {
        let n = self.cfg.n;
        let q = n / 4;
        for m in 0..n / 2 {
            tmp[2 * m] = f[q + m];
            tmp[2 * m + 1] = 0.5 * (f[q + m] + f[q + m + 1]);
        }
        std::mem::swap(f, tmp);
    }

    fn switch_adjoint(&self, psi: &mut Vec<f64>, tmp: &mut Vec<f64>) {
        let n = self.cfg.n;
        let q = n / 4;
        tmp.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..n / 2 {
            tmp[q + m] += psi[2 * m] + 0.5 * psi[2 * m + 1];
            tmp[q + m + 1] += 0.5 * psi[2 * m + 1];
        }
        std::mem::swap(psi, tmp);
    }
}

impl Scheme for RatioFrameScheme {
    fn width(&self) -> usize {
        self.cfg.n
    }
    fn steps(&self) -> usize {
        self.steps.len()
    }
    fn initial(&self) -> Vec<f64> {
        vec![1.0; self.cfg.n]
    }
    fn gain(&self, k: usize) -> f64 {
        self.steps[k].gain
    }
    fn new_scratch(&self) -> Scratch {
        let n = self.cfg.n;
        Scratch {
            tmp: vec![0.0; n],
            buf: vec![Complex::new(0.0, 0.0); n],
            fft_scratch: vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len())],
        }
    }
    fn pre(&self, k: usize, fields: &mut [Vec<f64>], ws: &mut Scratch) {
        self.heat(&self.mult_pre[k], fields, ws);
    }
    fn post(&self, k: usize, fields: &mut [Vec<f64>], noise: &[Vec<f64>], ws: &mut Scratch) {
        for (f, nz) in fields.iter_mut().zip(noise) {
            for (a, b) in f.iter_mut().zip(nz) {
                *a += b;
            }
        }
        self.heat(&self.mult_post[k], fields, ws);
        if self.steps[k].switch_after {
            for f in fields.iter_mut() {
                self.switch(f, &mut ws.tmp);
            }
        }
    }
    fn adjoint(&self, k: usize, psi: &mut Vec<f64>, ws: &mut Scratch) -> Vec<f64> {
        if self.steps[k].switch_after {
            self.switch_adjoint(psi, &mut ws.tmp);
        }
        self.heat(&self.mult_post[k], std::slice::from_mut(psi), ws);
        let noise = psi.clone();
        self.heat(&self.mult_pre[k], std::slice::from_mut(psi), ws);
        noise
    }
    fn final_spacing(&self) -> f64 {
        2.0 * self.cfg.l_fin / self.cfg.n as f64
    }
    fn final_coord(&self, j: usize) -> f64 {
        -self.cfg.l_fin + j as f64 * self.final_spacing()
    }
}
