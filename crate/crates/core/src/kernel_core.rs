//! Heat kernel and the deterministic functions built from it.

use std::f64::consts::{PI, SQRT_2};

use libm::{erf, erfc};

use crate::error::{domain, Result};
use crate::quadrature::{gk15, integrate, QuadOptions, QuadResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub t: f64,
    pub x: f64,
}

impl KernelPoint {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return domain(format!("heat kernel needs t > 0, got {t}"));
        }
        Ok(KernelPoint { t, x })
    }
}

/// p_t(x) without argument checks; `t` must be positive.
#[inline]
pub fn p(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

pub fn heat_kernel(q: KernelPoint) -> f64 {
    p(q.t, q.x)
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// P(lo < N(0,1) < hi), accurate in both tails.
pub fn norm_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        0.5 * (erfc(lo / SQRT_2) - erfc(hi / SQRT_2))
    } else if hi <= 0.0 {
        0.5 * (erfc(-hi / SQRT_2) - erfc(-lo / SQRT_2))
    } else {
        1.0 - 0.5 * erfc(hi / SQRT_2) - 0.5 * erfc(-lo / SQRT_2)
    }
}

/// ∫_{-R}^{R} p_v(x - y) dx.
#[inline]
pub fn box_mass(r: f64, v: f64, y: f64) -> f64 {
    let sd = v.sqrt();
    norm_mass((-r - y) / sd, (r - y) / sd)
}

pub fn factorization_residual(t: f64, s: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0 < s && s < t) {
        return domain(format!("factorization needs 0 < s < t, got s={s}, t={t}"));
    }
    let lhs = p(t - s, a) * p(s, b);
    let rhs = p(t, a + b) * p(s * (t - s) / t, b - (s / t) * (a + b));
    Ok(lhs - rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightQuery {
    pub r: f64,
    pub t: f64,
    pub s: f64,
    pub y: f64,
    pub normalizer: f64,
}

impl WeightQuery {
    pub fn new(r: f64, t: f64, s: f64, y: f64, normalizer: f64) -> Result<Self> {
        if !(r > 0.0) {
            return domain(format!("R must be positive, got {r}"));
        }
        if !(0.0 < s && s < t) {
            return domain(format!("weight needs 0 < s < t, got s={s}, t={t}"));
        }
        if !(normalizer > 0.0) {
            return domain(format!("normalizer must be positive, got {normalizer}"));
        }
        Ok(WeightQuery { r, t, s, y, normalizer })
    }
}

/// (1/σ) ∫_{Q_R} p_{t-s}(x - y) dx.
pub fn phi_weight(q: &WeightQuery) -> f64 {
    let v = box_mass(q.r, q.t - q.s, q.y) / q.normalizer;
    debug_assert!(v <= 1.0 / q.normalizer * (1.0 + 1e-12));
    v
}

/// (1/Σ) ∫_{Q_R} p_{s(t-s)/t}(y - (s/t) x) dx.
pub fn varphi_weight(q: &WeightQuery) -> f64 {
    let ratio = q.s / q.t;
    let var = q.s * (q.t - q.s) / q.t;
    let v = box_mass(ratio * q.r, var, q.y) / (ratio * q.normalizer);
    debug_assert!(v <= q.t / (q.s * q.normalizer) * (1.0 + 1e-12));
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDerivArgs {
    pub r: f64,
    pub z: f64,
    pub s: f64,
    pub y: f64,
    pub t: f64,
    pub x: f64,
}

impl SecondDerivArgs {
    pub fn new(r: f64, z: f64, s: f64, y: f64, t: f64, x: f64) -> Result<Self> {
        if !(r < s && s < t) {
            return domain(format!("need r < s < t, got r={r}, s={s}, t={t}"));
        }
        if !(r >= 0.0) {
            return domain(format!("need r >= 0, got {r}"));
        }
        Ok(SecondDerivArgs { r, z, s, y, t, x })
    }

    pub fn reflect(&self) -> Self {
        SecondDerivArgs {
            z: -self.z,
            y: -self.y,
            x: -self.x,
            ..*self
        }
    }
}

pub fn big_phi(a: &SecondDerivArgs) -> f64 {
    let ind = if (a.y - a.x).abs() > (a.z - a.y).abs() { 1.0 } else { 0.0 };
    let tail = (p(a.t - a.r, a.z - a.y) + p(a.t - a.r, a.z - a.x) + ind) / (a.s - a.r).powf(0.25);
    p(a.t - a.s, a.x - a.y) * (p(a.s - a.r, a.y - a.z) + tail)
}

/// ∫_ℝ Π_i p_{b_i}(w - c_i) dw for three Gaussians.
pub fn triple_gaussian(b: [f64; 3], c: [f64; 3]) -> f64 {
    let pair = b[0] * b[1] + b[0] * b[2] + b[1] * b[2];
    let q = (c[0] - c[1]).powi(2) * b[2] + (c[0] - c[2]).powi(2) * b[1] + (c[1] - c[2]).powi(2) * b[0];
    (-0.5 * q / pair).exp() / (2.0 * PI * pair.sqrt())
}

/// Point-mass part of K²: p²_{t-s}(x-y) p²_{s-r}(y-z).
pub fn k_atom(a: &SecondDerivArgs) -> f64 {
    (p(a.t - a.s, a.x - a.y) * p(a.s - a.r, a.y - a.z)).powi(2)
}

/// θ-integrand of the bulk part of K² after the substitution θ = s + (t-s) sin²(πu/2).
pub(crate) fn k_bulk_integrand(a: &SecondDerivArgs, u: f64) -> f64 {
    let h = 0.5 * PI * u;
    let (sn, cs) = h.sin_cos();
    let a1 = (a.t - a.s) * cs * cs;
    let a3 = (a.t - a.s) * sn * sn;
    let a2 = a3 + (a.s - a.r);
    // Π p²_{a_i} = Π p_{a_i/2}/sqrt(4π a_i); the a1, a3 prefactors cancel against dθ/du
    0.25 / (4.0 * PI * a2).sqrt() * triple_gaussian([0.5 * a1, 0.5 * a2, 0.5 * a3], [a.x, a.z, a.y])
}

pub fn k_bulk(a: &SecondDerivArgs) -> Result<QuadResult> {
    let opts = QuadOptions {
        rel_tol: 1e-8,
        abs_tol: f64::MIN_POSITIVE,
        max_intervals: 4000,
    };
    integrate(|u| k_bulk_integrand(a, u), 0.0, 1.0, opts)
}

pub fn k_integral(a: &SecondDerivArgs) -> Result<f64> {
    Ok((k_atom(a) + k_bulk(a)?.value).sqrt())
}

/// (1 - cos ξ)/ξ², with the removable singularity filled by its Taylor series.
pub fn fejer_weight(xi: f64) -> f64 {
    if xi.abs() < 1e-4 {
        let x2 = xi * xi;
        0.5 - x2 / 24.0 + x2 * x2 / 720.0
    } else {
        let s = (0.5 * xi).sin();
        2.0 * s * s / (xi * xi)
    }
}

/// ∫_ℝ fejer_weight(ξ) e^{-c ξ²} dξ by period-wise quadrature plus an analytic tail; c ≥ 0.
pub fn fejer_gauss_integral(c: f64) -> Result<f64> {
    fejer_gauss_integral_split(c, 1)
}

/// Same integral with each period cut into `split` panels (used as a half-step cross-check).
pub fn fejer_gauss_integral_split(c: f64, split: usize) -> Result<f64> {
    let period = 2.0 * PI;
    let h = period / split as f64;
    let kmax = 4000 * split;
    let f = |x: f64| fejer_weight(x) * (-c * x * x).exp();
    let mut half = 0.0;
    let mut a = 0.0;
    let opts = QuadOptions::rel(1e-12);
    for k in 0..kmax {
        let b = a + h;
        let (v, e) = gk15(&f, a, b);
        half += if e <= 1e-13 * v.abs().max(1e-300) {
            v
        } else {
            integrate(f, a, b, opts)?.value
        };
        a = b;
        if (k + 1) % split == 0 && c * a * a > 45.0 {
            return Ok(2.0 * half);
        }
    }
    // beyond a multiple of 2π the cosine part is O(a^-3); keep the ∫ e^{-cξ²}/ξ² part exactly
    let tail = if c > 0.0 {
        (-c * a * a).exp() / a - (PI * c).sqrt() * erfc(a * c.sqrt())
    } else {
        1.0 / a
    };
    Ok(2.0 * (half + tail))
}

/// ∫∫_{Q_R²} p_b(x1 - x2) dx1 dx2 = ∫_{-2R}^{2R} (2R - |z|) p_b(z) dz in closed form.
pub fn box_pair_integral(r: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return 2.0 * r;
    }
    2.0 * r * erf(2.0 * r / (2.0 * b).sqrt()) - 2.0 * (b / (2.0 * PI)).sqrt() * (-(2.0 * r * r) / b).exp_m1().abs()
}

/// Variance of ∫_{Q_R} u(t,x)dx when σ ≡ 1: ∫_0^t box_pair_integral(R, 2(t-s)) ds.
pub fn flat_unit_variance(r: f64, t: f64) -> Result<f64> {
    let opts = QuadOptions::rel(1e-11);
    // substitution s = t - t v² removes the √ behaviour at s = t
    Ok(integrate(|v| 2.0 * t * v * box_pair_integral(r, 2.0 * t * v * v), 0.0, 1.0, opts)?.value)
}

/// First-chaos variance of ∫_{Q_R} U(t,x)dx for the parabolic Anderson ratio field.
pub fn pam_first_chaos_variance(r: f64, t: f64) -> Result<f64> {
    let opts = QuadOptions::rel(1e-10);
    // τ = t e^{-q}: (t/τ) dτ = t dq
    let f = |q: f64| {
        let tau = t * (-q).exp();
        t * box_pair_integral(r, 2.0 * t * (t - tau) / tau)
    };
    let mut total = integrate(f, 0.0, 1.0, opts)?.value;
    let mut a: f64 = 1.0;
    while a < 80.0 {
        total += integrate(f, a, 2.0 * a, opts)?.value;
        a *= 2.0;
    }
    Ok(total)
}
