use criterion::{criterion_group, criterion_main, Criterion};
use spdelab::ensemble::{flat_setup, pam_setup, run_ensemble, EnsembleRequest};
use spdelab::spde_engine::{CoefficientSpec, Scheme, Window};

fn request<'a>(scheme: &'a dyn Scheme, coeff: &'a CoefficientSpec, windows: &'a [Window], tangents: bool) -> EnsembleRequest<'a> {
    EnsembleRequest {
        scheme,
        coeff,
        windows,
        tangents,
        record: None,
        seed: 1,
        first_replica: 0,
        replicas: 16,
        workers: 1,
    }
}

fn ensembles(c: &mut Criterion) {
    let mut g = c.benchmark_group("ensemble_16_replicas");
    g.sample_size(10);
    let coeff = CoefficientSpec::two_plus_sine();
    let (flat, fw) = flat_setup(&[4.0, 8.0, 16.0, 32.0], 0.5, 0.25).unwrap();
    g.bench_function("flat_ladder", |b| b.iter(|| run_ensemble(&request(&flat, &coeff, &fw, false)).unwrap()));
    g.bench_function("flat_ladder_tangents", |b| {
        b.iter(|| run_ensemble(&request(&flat, &coeff, &fw, true)).unwrap())
    });
    let pam_coeff = CoefficientSpec::identity();
    let (pam, pw) = pam_setup(&[8.0, 16.0, 32.0, 64.0], 0.5, 0.2).unwrap();
    g.bench_function("pam_ladder", |b| b.iter(|| run_ensemble(&request(&pam, &pam_coeff, &pw, false)).unwrap()));
    g.finish();
}

criterion_group!(benches, ensembles);
criterion_main!(benches);
