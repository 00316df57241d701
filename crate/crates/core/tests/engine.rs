use spdelab::ensemble::{flat_setup, pam_setup, run_ensemble, EnsembleRequest};
use spdelab::ensemble_stats::{solve_volterra, Moments};
use spdelab::kernel_core::{flat_unit_variance, p, pam_first_chaos_variance};
use spdelab::noise_field::{sample_tape, GridSpec, Lane, NoiseTape, StreamKey};
use spdelab::spde_engine::{
    solve_case1, solve_case2_pam, spatial_average, tangent_projection, CoefficientSpec, FdInit, FdScheme, RecordSpec,
    Scheme, Window,
};
use spdelab::Error;

fn request<'a>(
    scheme: &'a dyn Scheme,
    coeff: &'a CoefficientSpec,
    windows: &'a [Window],
    record: Option<&'a RecordSpec>,
    replicas: usize,
) -> EnsembleRequest<'a> {
    EnsembleRequest {
        scheme,
        coeff,
        windows,
        tangents: false,
        record,
        seed: 2024,
        first_replica: 0,
        replicas,
        workers: 1,
    }
}

/// Pointwise window e_j: w·X = u(t, x_j).
fn point_window(scheme: &FdScheme, j: usize) -> Window {
    let mut w = vec![0.0; scheme.width()];
    w[j] = 1.0;
    Window::with_weights(scheme, 0.0, w, 0.0)
}

#[test]
fn zero_noise_coefficient_keeps_flat_data() {
    let g = GridSpec::new(4.0, 40, 0.5, 100).unwrap();
    let tape = sample_tape(g, StreamKey::new(3, 0, Lane::Solution)).unwrap();
    let path = solve_case1(g, &CoefficientSpec::constant(0.0), &tape).unwrap();
    for k in 0..=g.n_t {
        assert!(path.slice(k).iter().all(|v| *v == 1.0));
    }
    for r in [0.4, 1.0, 2.0] {
        assert!(spatial_average(&path, r, 1.7, 2.0 * r).unwrap().abs() < 1e-12);
    }
}

#[test]
fn additive_noise_pointwise_variance() {
    let t = 0.5;
    let (scheme, _) = flat_setup(&[1.0], t, 0.1).unwrap();
    let c = scheme.grid.center();
    let win = point_window(&scheme, c);
    // grid-corrected variance against the continuum value √(t/π)
    let discrete = win.unit_variance(&scheme);
    assert!((discrete / (t / std::f64::consts::PI).sqrt() - 1.0).abs() < 0.05, "{discrete}");
    let coeff = CoefficientSpec::constant_one();
    let rec = RecordSpec {
        steps: vec![scheme.steps()],
        nodes: vec![c, c + 7],
    };
    let out = run_ensemble(&request(&scheme, &coeff, std::slice::from_ref(&win), Some(&rec), 10_000)).unwrap();
    let m = Moments::from_slice(&out.s_samples(0));
    assert!((m.variance() / discrete - 1.0).abs() < 0.05, "{} vs {discrete}", m.variance());
    // the stochastic convolution is centred
    for node in 0..2 {
        let vals: Vec<f64> = out.valid_records().iter().map(|r| r[node]).collect();
        let mm = Moments::from_slice(&vals);
        assert!((mm.mean - 1.0).abs() < 3.0 * (mm.variance() / mm.n as f64).sqrt());
    }
}

#[test]
fn multiplicative_second_moment_matches_renewal_oracle() {
    let t = 0.5;
    let (scheme, _) = flat_setup(&[1.0], t, 0.1).unwrap();
    let c = scheme.grid.center();
    let coeff = CoefficientSpec::identity();
    let nodes: Vec<usize> = (0..21).map(|i| c - 20 + 2 * i).collect();
    let rec = RecordSpec {
        steps: vec![scheme.steps()],
        nodes: nodes.clone(),
    };
    let win = point_window(&scheme, c);
    let out = run_ensemble(&request(&scheme, &coeff, std::slice::from_ref(&win), Some(&rec), 10_000)).unwrap();
    assert_eq!(out.aborted, 0);
    let target = solve_volterra(t, 2000).unwrap().eval(t);
    let recs = out.valid_records();
    let moment = |i: usize, p_ord: i32| recs.iter().map(|r| r[i].abs().powi(p_ord)).sum::<f64>() / recs.len() as f64;
    for i in [0, 10, 20] {
        let m2 = moment(i, 2);
        assert!((m2 / target - 1.0).abs() < 0.10, "node {i}: {m2} vs {target}");
    }
    // flat data: moments are uniformly bounded over the nodes; high moments are dominated by a
    // few intermittent replicas, so the band widens with p
    for (p_ord, band) in [(4, 4.0), (8, 100.0)] {
        let mut ms: Vec<f64> = (0..nodes.len()).map(|i| moment(i, p_ord)).collect();
        ms.sort_by(f64::total_cmp);
        let med = ms[ms.len() / 2];
        let hi = ms[ms.len() - 1];
        assert!(med > 0.0 && hi.is_finite() && hi / med < band, "p = {p_ord}: {ms:?}");
    }
}

#[test]
fn noiseless_pam_is_the_heat_kernel() {
    let t = 0.5;
    let g = GridSpec::auto(1.0, t, 0.02).unwrap();
    let key = StreamKey::new(0, 0, Lane::Solution);
    let path = solve_case2_pam(g, &NoiseTape::zeros(g, key)).unwrap();
    let c = g.center();
    assert_eq!(path.slice(0)[c], 1.0 / g.dx());
    let u = path.slice(g.n_t)[c];
    assert!((u / p(t, 0.0) - 1.0).abs() < 0.01);
    let mass: f64 = path.slice(g.n_t).iter().sum::<f64>() * g.dx();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!(path.ratio_slice(0).is_none());
    assert!((path.ratio_slice(g.n_t).unwrap()[c] - 1.0).abs() < 0.01);
}

#[test]
fn pam_ratio_field_has_unit_mean_and_is_stationary() {
    let t = 0.5;
    let g = GridSpec::auto(1.0, t, 0.1).unwrap();
    let scheme = FdScheme::new(g, FdInit::Delta);
    let c = g.center();
    let j2 = g.node(0.7);
    let rec = RecordSpec {
        steps: vec![g.n_t],
        nodes: vec![c, j2],
    };
    let coeff = CoefficientSpec::identity();
    let win = point_window(&scheme, c);
    let out = run_ensemble(&request(&scheme, &coeff, std::slice::from_ref(&win), Some(&rec), 8000)).unwrap();
    let recs = out.valid_records();
    let mut vars = Vec::new();
    for (i, j) in [c, j2].into_iter().enumerate() {
        let us: Vec<f64> = recs.iter().map(|r| r[i] / p(t, g.x(j))).collect();
        let m = Moments::from_slice(&us);
        let se = (m.variance() / m.n as f64).sqrt();
        assert!((m.mean - 1.0).abs() < 3.0 * se + 0.01, "node {j}: mean {} se {se}", m.mean);
        vars.push(m.variance());
    }
    // relative standard error of a sample variance is about √(κ/n); allow a generous band
    assert!((vars[0] / vars[1] - 1.0).abs() < 0.15, "{vars:?}");
}

#[test]
fn tangent_projection_for_additive_noise_is_deterministic() {
    let t = 0.5;
    let r = 2.0;
    let g = GridSpec::auto(r, t, 0.05).unwrap();
    let coeff = CoefficientSpec::constant_one();
    let oracle = flat_unit_variance(r, t).unwrap();
    let mut first = None;
    for rep in 0..3 {
        let tape = sample_tape(g, StreamKey::new(8, rep, Lane::Solution)).unwrap();
        let path = solve_case1(g, &coeff, &tape).unwrap();
        let ts = tangent_projection(&path, &coeff, &tape, r, 1.0).unwrap();
        assert!((ts.projection / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", ts.projection);
        match first {
            None => first = Some(ts.projection),
            Some(f) => assert!((ts.projection - f).abs() < 1e-12 * f),
        }
    }
}

#[test]
fn tangent_rejects_a_foreign_tape() {
    let g = GridSpec::auto(1.0, 0.5, 0.1).unwrap();
    let coeff = CoefficientSpec::two_plus_sine();
    let tape = sample_tape(g, StreamKey::new(8, 0, Lane::Solution)).unwrap();
    let other = sample_tape(g, StreamKey::new(8, 1, Lane::Solution)).unwrap();
    let path = solve_case1(g, &coeff, &tape).unwrap();
    assert!(matches!(
        tangent_projection(&path, &coeff, &other, 1.0, 1.0),
        Err(Error::TapeMismatch(_))
    ));
    assert!(tangent_projection(&path, &coeff, &tape, 1.0, 0.0).is_err());
}

#[test]
fn positivity_of_the_tangent_projection() {
    let t = 0.1;
    let (scheme, wins) = flat_setup(&[1.0, 2.0], t, 0.1).unwrap();
    let coeff = CoefficientSpec::identity();
    let mut req = request(&scheme, &coeff, &wins, None, 1000);
    req.tangents = true;
    let out = run_ensemble(&req).unwrap();
    for i in 0..wins.len() {
        let a = out.a_samples(i);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(a.iter().all(|v| *v >= -1e-6 * scale));
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let (scheme, wins) = flat_setup(&[2.0, 4.0], 0.5, 0.25).unwrap();
    let coeff = CoefficientSpec::two_plus_sine();
    let mut req = request(&scheme, &coeff, &wins, None, 200);
    req.tangents = true;
    let one = run_ensemble(&req).unwrap();
    req.workers = 4;
    let four = run_ensemble(&req).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.s), bits(&four.s));
    assert_eq!(bits(&one.a), bits(&four.a));
    assert_eq!(bits(&one.b), bits(&four.b));
}

#[test]
fn replica_offsets_address_the_same_streams() {
    let (scheme, wins) = flat_setup(&[2.0], 0.5, 0.25).unwrap();
    let coeff = CoefficientSpec::two_plus_sine();
    let all = run_ensemble(&request(&scheme, &coeff, &wins, None, 80)).unwrap();
    let mut req = request(&scheme, &coeff, &wins, None, 30);
    req.first_replica = 50;
    let tail = run_ensemble(&req).unwrap();
    assert_eq!(&all.s[50..], &tail.s[..]);
}

#[test]
fn divergent_replicas_are_aborted_and_counted() {
    let (scheme, wins) = flat_setup(&[1.0], 0.5, 0.25).unwrap();
    let coeff = CoefficientSpec::constant(1e14);
    let out = run_ensemble(&request(&scheme, &coeff, &wins, None, 10)).unwrap();
    assert_eq!(out.aborted, 10);
    assert!(out.first_abort.as_ref().unwrap().contains("diverged"));
    assert!(out.s_samples(0).is_empty());
    assert_eq!(out.abort_fraction(), 1.0);

    let g = GridSpec::auto(1.0, 0.5, 0.25).unwrap();
    let tape = sample_tape(g, StreamKey::new(1, 0, Lane::Solution)).unwrap();
    match solve_case1(g, &coeff, &tape) {
        Err(Error::Diverged { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected divergence, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn zero_workers_is_rejected() {
    let (scheme, wins) = flat_setup(&[1.0], 0.5, 0.25).unwrap();
    let coeff = CoefficientSpec::constant_one();
    let mut req = request(&scheme, &coeff, &wins, None, 4);
    req.workers = 0;
    assert!(run_ensemble(&req).is_err());
}

#[test]
fn window_variance_converges_under_refinement() {
    let t = 0.5;
    for r in [4.0, 8.0] {
        let (s1, w1) = flat_setup(&[r], t, 0.25).unwrap();
        let (s2, w2) = flat_setup(&[r], t, 0.125).unwrap();
        let v1 = w1[0].unit_variance(&s1);
        let v2 = w2[0].unit_variance(&s2);
        assert!((v1 / v2 - 1.0).abs() < 0.03, "R {r}: {v1} vs {v2}");
        let q = flat_unit_variance(r, t).unwrap();
        assert!((v2 / q - 1.0).abs() < 0.03, "R {r}: {v2} vs {q}");
    }
}

#[test]
fn ratio_frame_linear_variance_matches_quadrature() {
    let t = 0.5;
    let (scheme, wins) = pam_setup(&[8.0, 16.0], t, 0.2).unwrap();
    for w in &wins {
        let v = w.unit_variance(&scheme);
        let q = pam_first_chaos_variance(w.r, t).unwrap();
        assert!((v / q - 1.0).abs() < 0.01, "R {}: {v} vs {q}", w.r);
    }
}

#[test]
fn pam_ensemble_self_normalizes() {
    let t = 0.5;
    let (scheme, wins) = pam_setup(&[8.0], t, 0.2).unwrap();
    let coeff = CoefficientSpec::identity();
    let out = run_ensemble(&request(&scheme, &coeff, &wins, None, 500)).unwrap();
    assert_eq!(out.aborted, 0);
    let f = spdelab::ensemble_stats::self_normalize(&out.s_samples(0));
    let m = Moments::from_slice(&f);
    assert!(m.mean.abs() < 1e-12);
    assert!((m.variance() - 1.0).abs() < 1e-12);
}
