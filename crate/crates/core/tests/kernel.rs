use std::f64::consts::PI;

use proptest::prelude::*;
use spdelab::kernel_core::*;
use spdelab::quadrature::{integrate, integrate_pts, QuadOptions};
use libm::erf;

#[test]
fn heat_kernel_values() {
    let v = heat_kernel(KernelPoint::new(1.0, 0.0).unwrap());
    assert!((v - 0.3989423).abs() < 1e-7);
    let v = heat_kernel(KernelPoint::new(0.5, 1.0).unwrap());
    assert!((v - 0.2075537).abs() < 1e-7);
    assert_eq!(p(2.0, -3.0), p(2.0, 3.0));
    assert!(KernelPoint::new(0.0, 1.0).is_err());
    assert!(KernelPoint::new(-1.0, 1.0).is_err());
}

#[test]
fn factorization_examples() {
    assert!(factorization_residual(2.0, 1.0, 0.0, 0.0).unwrap().abs() < 1e-15);
    assert!((p(1.0, 0.0) * p(1.0, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    assert!(factorization_residual(1.7, 0.3, 0.4, -1.1).unwrap().abs() < 1e-12);
    assert!(factorization_residual(1.0, 0.999, 5.0, 0.0).unwrap().abs() < 1e-12);
    assert!(factorization_residual(1.0, 1.0, 0.0, 0.0).is_err());
    assert!(factorization_residual(1.0, 0.0, 0.0, 0.0).is_err());
}

#[test]
fn phi_weight_examples() {
    let q = WeightQuery::new(1.0, 2.0, 1.0, 0.0, 1.0).unwrap();
    assert!((phi_weight(&q) - 0.6826895).abs() < 1e-7);
    let far = WeightQuery::new(1.0, 2.0, 1.0, 100.0, 1.0).unwrap();
    assert!(phi_weight(&far) < 1e-300);
    assert!(WeightQuery::new(1.0, 2.0, 2.0, 0.0, 1.0).is_err());
    assert!(WeightQuery::new(1.0, 2.0, 1.0, 0.0, 0.0).is_err());
}

#[test]
fn varphi_weight_against_quadrature() {
    let (r, t, s, y) = (1.0, 2.0, 1.0, 0.0);
    let q = WeightQuery::new(r, t, s, y, 1.0).unwrap();
    let v = s * (t - s) / t;
    let oracle = integrate(|x| p(v, y - s / t * x), -r, r, QuadOptions::rel(1e-13)).unwrap().value;
    assert!((varphi_weight(&q) - oracle).abs() < 1e-12);
    // s → t with y inside the shrunken box: mass concentrates to 1/normalizer
    let q = WeightQuery::new(1.0, 1.0, 1.0 - 1e-9, 0.3, 2.0).unwrap();
    assert!((varphi_weight(&q) - 0.5).abs() < 1e-6);
}

#[test]
fn big_phi_example() {
    let a = SecondDerivArgs::new(0.1, 0.0, 0.2, 0.0, 1.0, 0.0).unwrap();
    let want = p(0.8, 0.0) * (p(0.1, 0.0) + (p(0.9, 0.0) + p(0.9, 0.0)) * 0.1f64.powf(-0.25));
    assert!((big_phi(&a) - want).abs() < 1e-14 * want);
    // |y - x| > |z - y| switches the indicator on
    let b = SecondDerivArgs::new(0.1, 0.0, 0.2, 0.1, 1.0, 1.0).unwrap();
    let with = big_phi(&b);
    let without = p(0.8, 0.9) * (p(0.1, 0.1) + (p(0.9, -0.1) + p(0.9, -1.0)) * 0.1f64.powf(-0.25));
    assert!((with - without - p(0.8, 0.9) * 0.1f64.powf(-0.25)).abs() < 1e-14);
    assert!(SecondDerivArgs::new(0.2, 0.0, 0.2, 0.0, 1.0, 0.0).is_err());
    let near = SecondDerivArgs::new(0.1, 0.3, 0.1 + 1e-12, 0.5, 1.0, 0.0).unwrap();
    assert!(big_phi(&near) > 1e2 * big_phi(&SecondDerivArgs::new(0.1, 0.3, 0.2, 0.5, 1.0, 0.0).unwrap()));
}

#[test]
fn k_atom_example() {
    let a = SecondDerivArgs::new(0.1, 0.0, 0.5, 0.0, 1.0, 0.0).unwrap();
    let want = (0.5641896f64 * 0.5641896 * 0.6307831 * 0.6307831).powi(1);
    assert!((k_atom(&a) - want).abs() < 1e-6);
}

/// Direct 2-D evaluation of ∫_s^t ∫ p²p²p² dw dθ: fixed midpoint rule in θ (after
/// θ = s + (t-s) sin²(πv/2), which removes both endpoint singularities) and numerical w-integrals.
fn k_bulk_oracle(a: &SecondDerivArgs, n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let v = (i as f64 + 0.5) / n as f64;
        let (sn, cs) = (0.5 * PI * v).sin_cos();
        let theta = a.s + (a.t - a.s) * sn * sn;
        let jac = (a.t - a.s) * PI * sn * cs;
        let g = |w: f64| (p(a.t - theta, a.x - w) * p(theta - a.r, w - a.z) * p(theta - a.s, w - a.y)).powi(2);
        let sd = (theta - a.s).sqrt().min((a.t - theta).sqrt()).max(1e-6);
        let pts = [a.y - 40.0 * sd - 10.0, a.y - 10.0 * sd, a.x, a.y, a.z, a.y + 10.0 * sd, a.y + 40.0 * sd + 10.0];
        let mut pts = pts.to_vec();
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        acc += jac * integrate_pts(g, &pts, QuadOptions::rel(1e-12)).unwrap().value;
    }
    acc / n as f64
}

#[test]
fn k_integral_against_riemann_oracle() {
    let a = SecondDerivArgs::new(0.1, 0.0, 0.5, 0.0, 1.0, 0.0).unwrap();
    let bulk = k_bulk(&a).unwrap().value;
    let coarse = k_bulk_oracle(&a, 1000);
    let fine = k_bulk_oracle(&a, 2000);
    assert!((coarse - fine).abs() < 1e-6 * fine);
    assert!((bulk - fine).abs() < 1e-6 * fine, "{bulk} vs {fine}");
    let k = k_integral(&a).unwrap();
    assert!((k * k - k_atom(&a) - bulk).abs() < 1e-12 * k * k);
}

#[test]
fn fejer_values() {
    assert_eq!(fejer_weight(0.0), 0.5);
    assert!((fejer_weight(PI) - 2.0 / (PI * PI)).abs() < 1e-15);
    let total = fejer_gauss_integral(0.0).unwrap();
    assert!((total - PI).abs() < 1e-6, "{total}");
}

fn fejer_gauss_closed(c: f64) -> f64 {
    PI * erf(1.0 / (2.0 * c.sqrt())) - 2.0 * (PI * c).sqrt() * (1.0 - (-1.0 / (4.0 * c)).exp())
}

#[test]
fn fejer_gauss_against_closed_form() {
    for &c in &[1e-6, 1e-3, 0.1, 1.0, 10.0] {
        let q = fejer_gauss_integral(c).unwrap();
        let e = fejer_gauss_closed(c);
        assert!((q - e).abs() < 1e-9 * e, "c = {c}: {q} vs {e}");
    }
}

#[test]
fn box_pair_matches_verified_parseval_form() {
    for &(r, t) in &[(1.0, 0.5), (4.0, 1.0), (0.5, 2.0), (32.0, 0.5)] {
        let lhs = box_pair_integral(r, t);
        let rhs = 2.0 * r / PI * fejer_gauss_closed(t / (8.0 * r * r));
        assert!((lhs - rhs).abs() < 1e-10 * lhs, "{lhs} vs {rhs}");
        let cut = (10.0 * t.sqrt()).min(2.0 * r);
        let direct = 2.0 * integrate_pts(|z| (2.0 * r - z) * p(t, z), &[0.0, cut, 2.0 * r], QuadOptions::rel(1e-13)).unwrap().value;
        assert!((lhs - direct).abs() < 1e-10 * lhs, "{r} {t}: {lhs} vs {direct}");
    }
    assert!((box_pair_integral(1.0, 1e-14) - 2.0).abs() < 1e-6);
}

#[test]
fn flat_unit_variance_limit() {
    // Var/R → 2t
    let v = flat_unit_variance(256.0, 0.5).unwrap();
    assert!((v / 256.0 - 1.0).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn semigroup(s in 0.01f64..2.0, t in 0.01f64..2.0, x in -4.0f64..4.0) {
        let reach = 12.0 * (s.max(t)).sqrt() + x.abs();
        let q = integrate_pts(|y| p(s, x - y) * p(t, y), &[-reach, x.min(0.0), x.max(0.0), reach], QuadOptions::rel(1e-12)).unwrap().value;
        let e = p(s + t, x);
        prop_assert!((q - e).abs() <= 1e-8 * e);
    }

    #[test]
    fn square_identity(t in 1e-3f64..10.0, x in -5.0f64..5.0) {
        let l = p(t, x) * p(t, x);
        let r = p(t / 2.0, x) / (4.0 * PI * t).sqrt();
        prop_assert!((l - r).abs() <= 1e-14 * l.max(1e-300));
    }

    #[test]
    fn factorization_vanishes(t in 0.01f64..3.0, f in 0.001f64..0.999, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        prop_assert!(factorization_residual(t, f * t, a, b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weight_bounds(r in 0.1f64..50.0, t in 0.01f64..2.0, f in 0.001f64..0.999, y in -60.0f64..60.0, n in 0.1f64..10.0) {
        let q = WeightQuery::new(r, t, f * t, y, n).unwrap();
        prop_assert!(phi_weight(&q) >= 0.0 && phi_weight(&q) <= 1.0 / n * (1.0 + 1e-15));
        prop_assert!(varphi_weight(&q) >= 0.0 && varphi_weight(&q) <= t / (f * t * n) * (1.0 + 1e-12));
    }

    #[test]
    fn big_phi_reflection(r in 0.0f64..0.5, g in 0.001f64..0.4, h in 0.001f64..0.5, z in -3.0f64..3.0, y in -3.0f64..3.0, x in -3.0f64..3.0) {
        let a = SecondDerivArgs::new(r, z, r + g, y, r + g + h, x).unwrap();
        prop_assert_eq!(big_phi(&a), big_phi(&a.reflect()));
    }

    #[test]
    fn fejer_even_and_bounded(xi in -1e3f64..1e3) {
        let f = fejer_weight(xi);
        prop_assert_eq!(f, fejer_weight(-xi));
        prop_assert!(f <= 0.5 && f >= 0.0);
        if xi.abs() > 1.0 {
            prop_assert!(f <= 2.0 / (xi * xi));
        }
    }
}
