use libm::erf;
use proptest::prelude::*;
use spdelab::ensemble_stats::{
    analytic_density, kde_density, ks_statistic, rate_fit, self_normalize, solve_volterra, std_normal_pdf,
    sup_distance, tv_distance, variance_check, Bandwidth, EnsembleAccumulator, Moments, ReplicaSample, VarianceOracle,
};
use spdelab::kernel_core::norm_cdf;
use spdelab::noise_field::{derive_stream, Lane, StreamKey};
use spdelab::spde_engine::CaseTag;
use spdelab::Error;

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut s = derive_stream(StreamKey::new(seed, 0, Lane::Quadrature));
    (0..n).map(|_| s.next_normal()).collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn two_single_sample_accumulators() {
    let mut a = EnsembleAccumulator::new("k");
    a.accumulate("k", ReplicaSample { f: 0.0, dvf: None, dvdvf: None }).unwrap();
    let mut b = EnsembleAccumulator::new("k");
    b.accumulate("k", ReplicaSample { f: 2.0, dvf: None, dvdvf: None }).unwrap();
    a.merge(&b).unwrap();
    assert_eq!(a.count(), 2);
    assert_eq!(a.moments.mean, 1.0);
    assert_eq!(a.sample_variance(), 2.0);
}

#[test]
fn configuration_mismatch_is_a_hard_error() {
    let mut a = EnsembleAccumulator::new("flat/R=4");
    let s = ReplicaSample { f: 1.0, dvf: Some(1.0), dvdvf: None };
    assert!(matches!(a.accumulate("flat/R=8", s), Err(Error::ConfigMismatch(_))));
    let b = EnsembleAccumulator::new("pam/R=4");
    assert!(matches!(a.merge(&b), Err(Error::ConfigMismatch(_))));
}

#[test]
fn sample_store_respects_the_cap() {
    let mut a = EnsembleAccumulator::with_cap("k", 10);
    for i in 0..25 {
        a.accumulate("k", ReplicaSample { f: i as f64, dvf: Some(1.0), dvdvf: Some(0.0) }).unwrap();
    }
    assert_eq!(a.samples.len(), 10);
    assert_eq!(a.dvf.len(), 10);
    assert_eq!(a.count(), 25);
    assert!((a.moments.mean - 12.0).abs() < 1e-12);
}

#[test]
fn gaussian_fourth_moment() {
    let m = Moments::from_slice(&normals(1, 1_000_000));
    assert!((m.central(4) - 3.0).abs() < 0.05, "{}", m.central(4));
    assert!(m.skewness().abs() < 0.01);
    assert!((m.central(6) - 15.0).abs() < 0.5);
}

#[test]
fn streaming_moments_survive_a_large_offset() {
    let xs: Vec<f64> = normals(2, 1_000_000).iter().map(|x| 1e9 + x).collect();
    let m = Moments::from_slice(&xs);
    assert!((m.variance() - 1.0).abs() < 0.01, "{}", m.variance());
    assert!((m.central(4) / m.central(2).powi(2) - 3.0).abs() < 0.05);
}

#[test]
fn kde_of_normal_samples() {
    for seed in 0..3 {
        let d = kde_density(&normals(seed, 100_000), Bandwidth::Default).unwrap();
        let sup = sup_distance(&d);
        assert!(sup < 0.015, "seed {seed}: {sup}");
        assert!(d.density.iter().all(|v| *v >= 0.0));
        let mass: f64 = d.density.windows(2).map(|w| 0.005 * (w[0] + w[1])).sum();
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }
}

#[test]
fn kde_guards() {
    assert!(matches!(
        kde_density(&normals(0, 999), Bandwidth::Default),
        Err(Error::TooFewSamples { have: 999, need: 1000 })
    ));
    assert!(matches!(
        kde_density(&vec![0.3; 5000], Bandwidth::Default),
        Err(Error::Degenerate(_))
    ));
    let mut xs = normals(0, 2000);
    assert!(kde_density(&xs, Bandwidth::Fixed(0.0)).is_err());
    xs[7] = f64::NAN;
    assert!(matches!(kde_density(&xs, Bandwidth::Default), Err(Error::Degenerate(_))));
}

#[test]
fn kde_error_shrinks_with_sample_size() {
    let mean_sup = |n: usize| -> f64 {
        (0..4)
            .map(|seed| sup_distance(&kde_density(&normals(100 + seed, n), Bandwidth::Default).unwrap()))
            .sum::<f64>()
            / 4.0
    };
    let s = [mean_sup(5_000), mean_sup(20_000), mean_sup(80_000)];
    assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
}

#[test]
fn binned_and_direct_kde_agree() {
    // 2·10⁵ samples switch to linear binning; the first 10⁴ are summed directly
    let xs = normals(9, 200_000);
    let h = 0.1;
    let binned = kde_density(&xs, Bandwidth::Fixed(h)).unwrap();
    let grid = binned.grid.clone();
    let direct: Vec<f64> = grid
        .iter()
        .map(|&x| xs.iter().map(|s| std_normal_pdf((x - s) / h)).sum::<f64>() / (xs.len() as f64 * h))
        .collect();
    let worst = binned.density.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

/// sup_x |f(x) − φ(x)| by grid search at step 1e-4.
fn sup_oracle(f: impl Fn(f64) -> f64) -> f64 {
    (0..=100_000)
        .map(|i| -5.0 + i as f64 * 1e-4)
        .map(|x| (f(x) - std_normal_pdf(x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn sup_distance_examples() {
    assert_eq!(sup_distance(&analytic_density(std_normal_pdf)), 0.0);
    let shifted = |x: f64| std_normal_pdf(x - 0.1);
    let oracle = sup_oracle(shifted);
    // 0.1·max|φ'| to first order; the 0.0398 figure often quoted for this shift is the TV distance
    assert!((oracle - 0.024177).abs() < 1e-5);
    assert!((sup_distance(&analytic_density(shifted)) - oracle).abs() < 1e-5);
    let wide = |x: f64| std_normal_pdf(x / 1.1) / 1.1;
    let oracle = sup_oracle(wide);
    assert!((sup_distance(&analytic_density(wide)) - oracle).abs() < 1e-5);
}

#[test]
fn tv_distance_examples() {
    assert_eq!(tv_distance(&analytic_density(std_normal_pdf)), 0.0);
    let d = tv_distance(&analytic_density(|x| std_normal_pdf(x - 0.1)));
    let exact = 2.0 * norm_cdf(0.05) - 1.0;
    assert!((exact - 0.0399).abs() < 1e-4);
    assert!((d - exact).abs() < 1e-5, "{d} vs {exact}");
    assert!((exact - erf(0.05 / std::f64::consts::SQRT_2)).abs() < 1e-15);
}

#[test]
fn distances_ignore_sample_order() {
    let xs = normals(4, 30_000);
    let mut ys = xs.clone();
    ys.reverse();
    ys.rotate_left(12_345);
    let a = kde_density(&xs, Bandwidth::Default).unwrap();
    let b = kde_density(&ys, Bandwidth::Default).unwrap();
    assert!(close(sup_distance(&a), sup_distance(&b), 1e-9));
    assert!(close(tv_distance(&a), tv_distance(&b), 1e-9));
    assert_eq!(ks_statistic(&xs), ks_statistic(&ys));
}

#[test]
fn ks_of_normal_samples() {
    assert!(ks_statistic(&normals(5, 10_000)) < 0.02);
    let shifted: Vec<f64> = normals(5, 10_000).iter().map(|x| x + 0.2).collect();
    assert!(ks_statistic(&shifted) > 0.05);
}

#[test]
fn rate_fit_examples() {
    let ladder = [4.0f64, 8.0, 16.0, 32.0];
    let fit = rate_fit(&ladder.map(|r| (r, r.powf(-0.5)))).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12);
    assert!(fit.slope_stderr < 1e-9);
    let fit = rate_fit(&ladder.map(|r| (r, (r.ln() / r).sqrt()))).unwrap();
    // slope = -1/2 + ½·(LS slope of log log R on log R); the log factor lifts it above -0.3 here
    let lx: Vec<f64> = ladder.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = lx.iter().map(|x| x.ln()).collect();
    let mx = lx.iter().sum::<f64>() / 4.0;
    let my = ly.iter().sum::<f64>() / 4.0;
    let b = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((fit.slope - (-0.5 + 0.5 * b)).abs() < 1e-12);
    assert!(fit.slope > -0.5 && fit.slope < -0.25, "{}", fit.slope);
    let fit = rate_fit(&ladder.map(|r| (r, 0.02))).unwrap();
    assert!(fit.slope.abs() < 1e-12);
    assert!(rate_fit(&[(4.0, 1.0), (8.0, 0.5)]).is_err());
    assert!(rate_fit(&[(4.0, 1.0), (8.0, 0.0), (16.0, 0.2)]).is_err());
}

#[test]
fn variance_targets() {
    let r = variance_check(33.0, 32.0, 0.5, CaseTag::Flat, VarianceOracle::Xi(&|_| 1.0)).unwrap();
    assert!((r.target - 1.0).abs() < 1e-12);
    assert!((r.ratio - 33.0 / 32.0).abs() < 1e-15);
    assert!(variance_check(1.0, 4.0, 0.5, CaseTag::Flat, VarianceOracle::None).is_err());

    let sol = solve_volterra(0.5, 2000).unwrap();
    assert_eq!(sol.eval(0.0), 1.0);
    let xi = |s: f64| sol.eval(s);
    let r = variance_check(40.0, 32.0, 0.5, CaseTag::Flat, VarianceOracle::Xi(&xi)).unwrap();
    // ∫_0^t e^{s/4}(1 + erf(√s/2)) ds by the solver's own trapezoid agrees with the quadrature
    assert!((r.target - 2.0 * sol.integral(0.5)).abs() < 1e-6);
    assert!(r.target > 1.0 && r.target < 2.0 * 0.5 * sol.eval(0.5));

    let r = variance_check(64.0 * 64f64.ln(), 64.0, 0.5, CaseTag::Pam, VarianceOracle::None).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-12);
    assert_eq!(r.target, 1.0);
    assert!(r.rel_dev.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn merge_equals_concatenation(xs in prop::collection::vec(-50.0f64..50.0, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let whole = Moments::from_slice(&xs);
        let mut a = Moments::from_slice(&xs[..cut]);
        a.merge(&Moments::from_slice(&xs[cut..]));
        prop_assert_eq!(a.n, whole.n);
        prop_assert!(close(a.mean, whole.mean, 1e-12) || (a.mean - whole.mean).abs() < 1e-12);
        for p in 2..=8 {
            let (x, y) = (a.central(p), whole.central(p));
            prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-6), "p {}: {} vs {}", p, x, y);
        }
    }

    #[test]
    fn merge_order_is_irrelevant(xs in prop::collection::vec(-5.0f64..5.0, 9..90)) {
        let parts: Vec<Moments> = xs.chunks(xs.len() / 3).map(Moments::from_slice).collect();
        let mut fwd = Moments::new();
        for p in &parts {
            fwd.merge(p);
        }
        let mut rev = Moments::new();
        for p in parts.iter().rev() {
            rev.merge(p);
        }
        prop_assert!((fwd.mean - rev.mean).abs() < 1e-12);
        for p in 2..=8 {
            let (x, y) = (fwd.central(p), rev.central(p));
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn self_normalized_samples_are_standardized(xs in prop::collection::vec(-1e3f64..1e3, 3..300)) {
        let m0 = Moments::from_slice(&xs);
        prop_assume!(m0.std_dev() > 1e-6);
        let m = Moments::from_slice(&self_normalize(&xs));
        prop_assert!(m.mean.abs() < 1e-12);
        prop_assert!((m.variance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_is_a_probability_distance(mu in -3.0f64..3.0, s in 0.3f64..3.0) {
        let d = analytic_density(|x| std_normal_pdf((x - mu) / s) / s);
        let tv = tv_distance(&d);
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert!(sup_distance(&d) >= 0.0);
    }
}
