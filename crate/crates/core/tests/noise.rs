use proptest::prelude::*;
use spdelab::noise_field::{derive_stream, sample_tape, GridSpec, Lane, NoiseTape, StreamKey};

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn draws(key: StreamKey, n: usize) -> Vec<f64> {
    let mut s = derive_stream(key);
    (0..n).map(|_| s.next_normal()).collect()
}

const N: usize = 1_000_000;

#[test]
fn same_key_reproduces() {
    let key = StreamKey::new(42, 3, Lane::Solution);
    let a = draws(key, N);
    let b = draws(key, N);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn replicas_and_lanes_are_uncorrelated() {
    let base = draws(StreamKey::new(42, 0, Lane::Solution), N);
    let other_replica = draws(StreamKey::new(42, 1, Lane::Solution), N);
    let other_lane = draws(StreamKey::new(42, 0, Lane::Derivative), N);
    let lim = 4.0 / (N as f64).sqrt();
    assert!(correlation(&base, &other_replica).abs() < lim);
    assert!(correlation(&base, &other_lane).abs() < lim);
}

#[test]
fn slices_are_random_access() {
    let mut s = derive_stream(StreamKey::new(5, 9, Lane::Quadrature));
    let mut later = vec![0.0; 17];
    let mut first = vec![0.0; 17];
    s.fill_slice(40, &mut later);
    s.fill_slice(3, &mut first);
    let mut again = vec![0.0; 17];
    let mut fresh = derive_stream(StreamKey::new(5, 9, Lane::Quadrature));
    fresh.fill_slice(40, &mut again);
    assert_eq!(later, again);
    assert_ne!(first, later);
}

#[test]
fn tape_moments() {
    // 1000 × 1000 cells
    let g = GridSpec::new(500.0, 1000, 500.0, 1000).unwrap();
    let tape = sample_tape(g, StreamKey::new(11, 0, Lane::Solution)).unwrap();
    let n = (g.n_x * g.n_t) as f64;
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut cross = 0.0;
    for k in 0..g.n_t {
        for j in 0..g.n_x {
            let v = tape.draw(k, j);
            sum += v;
            sq += v * v;
            cross += v * tape.draw(k, (j + 1) % g.n_x);
        }
    }
    let mean = sum / n;
    assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
    let var = sq / n - mean * mean;
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
    // neighbouring cells: covariance consistent with zero at 4 sigma
    assert!((cross / n).abs() < 4.0 / n.sqrt());
}

#[test]
fn tapes_replay_bit_identically() {
    let g = GridSpec::new(3.0, 24, 0.2, 10).unwrap();
    let key = StreamKey::new(1, 2, Lane::Solution);
    let a = sample_tape(g, key).unwrap();
    let b = sample_tape(g, key).unwrap();
    assert_eq!(a.storage, b.storage);
    assert!(a.is_replayable());
    let regen = NoiseTape::regenerable(g, key);
    let scale = (g.dt() * g.dx()).sqrt();
    for k in 0..g.n_t {
        for j in 0..g.n_x {
            assert_eq!(regen.increment(k, j).to_bits(), a.increment(k, j).to_bits());
            assert_eq!(a.increment(k, j), a.draw(k, j) * scale);
        }
    }
}

#[test]
fn tape_key_mismatch_is_reported() {
    let g = GridSpec::new(3.0, 24, 0.2, 10).unwrap();
    let tape = NoiseTape::regenerable(g, StreamKey::new(1, 2, Lane::Solution));
    assert!(tape.check_matches(&g, StreamKey::new(1, 3, Lane::Solution)).is_err());
    let g2 = GridSpec::new(3.0, 24, 0.2, 12).unwrap();
    assert!(tape.check_matches(&g2, tape.key).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn auto_grid_invariants(r_max in 0.5f64..64.0, t in 0.05f64..2.0, dx in 0.02f64..0.5) {
        let g = GridSpec::auto(r_max, t, dx).unwrap();
        prop_assert!(g.dt() <= 0.5 * g.dx() * g.dx() * (1.0 + 1e-12));
        prop_assert!(g.check_truncation(r_max).is_ok());
        prop_assert_eq!(g.n_x % 2, 0);
        prop_assert!(g.x(g.center()).abs() < 1e-12 * g.l);
        prop_assert!((g.dx() - dx).abs() < 1e-12);
    }

    #[test]
    fn rejects_unstable_grids(l in 1.0f64..10.0, half in 2usize..200, t in 0.1f64..2.0) {
        let n_x = 2 * half;
        let dx = 2.0 * l / n_x as f64;
        let n_stable = (t / (0.5 * dx * dx)).ceil() as usize;
        prop_assert!(GridSpec::new(l, n_x, t, n_stable).is_ok());
        if n_stable > 1 {
            let n_bad = ((n_stable as f64) * 0.9).floor().max(1.0) as usize;
            if t / n_bad as f64 > 0.5 * dx * dx * (1.0 + 1e-9) {
                prop_assert!(GridSpec::new(l, n_x, t, n_bad).is_err());
            }
        }
    }
}
