//! Replica-parallel orchestration with results independent of the worker count.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::noise_field::{keyed_source, Lane, StreamKey};
use crate::spde_engine::{CoefficientSpec, Engine, FdInit, FdScheme, RatioFrameConfig, RatioFrameScheme, RecordSpec, Scheme, Window};
use crate::noise_field::GridSpec;

const CHUNK: usize = 32;

pub struct EnsembleRequest<'a> {
    pub scheme: &'a dyn Scheme,
    pub coeff: &'a CoefficientSpec,
    pub windows: &'a [Window],
    pub tangents: bool,
    pub record: Option<&'a RecordSpec>,
    pub seed: u64,
    pub first_replica: u64,
    pub replicas: usize,
    pub workers: usize,
}

/// Replica-major results; aborted replicas carry NaN and `valid = false`.
#[derive(Debug, Clone, Default)]
pub struct EnsembleOutput {
    pub n_windows: usize,
    pub replicas: usize,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub record_len: usize,
    pub records: Vec<f64>,
    pub valid: Vec<bool>,
    pub aborted: usize,
    pub first_abort: Option<String>,
}

impl EnsembleOutput {
    fn column(&self, v: &[f64], i: usize) -> Vec<f64> {
        (0..self.replicas)
            .filter(|&k| self.valid[k])
            .map(|k| v[k * self.n_windows + i])
            .collect()
    }

    pub fn s_samples(&self, window: usize) -> Vec<f64> {
        self.column(&self.s, window)
    }

    pub fn a_samples(&self, window: usize) -> Vec<f64> {
        self.column(&self.a, window)
    }

    pub fn b_samples(&self, window: usize) -> Vec<f64> {
        self.column(&self.b, window)
    }

    /// Recorded values of valid replicas, `record_len` per replica.
    pub fn valid_records(&self) -> Vec<&[f64]> {
        (0..self.replicas)
            .filter(|&k| self.valid[k])
            .map(|k| &self.records[k * self.record_len..(k + 1) * self.record_len])
            .collect()
    }

    pub fn abort_fraction(&self) -> f64 {
        self.aborted as f64 / self.replicas.max(1) as f64
    }
}

struct ChunkOut {
    s: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    records: Vec<f64>,
    valid: Vec<bool>,
    abort: Option<String>,
}

pub fn run_ensemble(req: &EnsembleRequest) -> Result<EnsembleOutput> {
    if req.workers == 0 {
        return domain("worker count must be positive");
    }
    let nw = req.windows.len();
    let record_len = req.record.map(|r| r.steps.len() * r.nodes.len()).unwrap_or(0);
    let engine = Engine {
        scheme: req.scheme,
        coeff: req.coeff,
        windows: req.windows,
        tangents: req.tangents,
        record: req.record,
    };
    let n_chunks = req.replicas.div_ceil(CHUNK);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.workers)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let chunks: Vec<ChunkOut> = pool.install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut buf = engine.buffers();
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(req.replicas);
                let mut out = ChunkOut {
                    s: Vec::with_capacity((hi - lo) * nw),
                    a: Vec::new(),
                    b: Vec::new(),
                    records: Vec::new(),
                    valid: Vec::with_capacity(hi - lo),
                    abort: None,
                };
                for r in lo..hi {
                    let key = StreamKey::new(req.seed, req.first_replica + r as u64, Lane::Solution);
                    let mut src = keyed_source(key);
                    match engine.run(&mut src, &mut buf) {
                        Ok(o) => {
                            out.s.extend(o.s);
                            if req.tangents {
                                out.a.extend(o.a);
                                out.b.extend(o.b);
                            }
                            out.records.extend(o.records);
                            out.valid.push(true);
                        }
                        Err(e) => {
                            out.s.extend(std::iter::repeat_n(f64::NAN, nw));
                            if req.tangents {
                                out.a.extend(std::iter::repeat_n(f64::NAN, nw));
                                out.b.extend(std::iter::repeat_n(f64::NAN, nw));
                            }
                            out.records.extend(std::iter::repeat_n(f64::NAN, record_len));
                            out.valid.push(false);
                            if out.abort.is_none() {
                                out.abort = Some(format!("replica {}: {e}", req.first_replica + r as u64));
                            }
                        }
                    }
                }
                out
            })
            .collect()
    });
    let mut res = EnsembleOutput {
        n_windows: nw,
        replicas: req.replicas,
        record_len,
        ..Default::default()
    };
    for c in chunks {
        res.s.extend(c.s);
        res.a.extend(c.a);
        res.b.extend(c.b);
        res.records.extend(c.records);
        res.valid.extend(c.valid);
        if res.first_abort.is_none() {
            res.first_abort = c.abort;
        }
    }
    res.aborted = res.valid.iter().filter(|v| !**v).count();
    Ok(res)
}

/// Flat-case grid and windows for a ladder (trapezoid windows, dt = dx²/2).
pub fn flat_setup(ladder: &[f64], t: f64, dx: f64) -> Result<(FdScheme, Vec<Window>)> {
    let r_max = ladder.iter().cloned().fold(0.0, f64::max);
    let grid = GridSpec::auto(r_max, t, dx)?;
    let scheme = FdScheme::new(grid, FdInit::Flat);
    let windows = ladder.iter().map(|&r| Window::new(&scheme, r)).collect::<Result<Vec<_>>>()?;
    Ok((scheme, windows))
}

/// Ratio-frame scheme and windows for a pam ladder.
pub fn pam_setup(ladder: &[f64], t: f64, deta: f64) -> Result<(RatioFrameScheme, Vec<Window>)> {
    let r_max = ladder.iter().cloned().fold(0.0, f64::max);
    let scheme = RatioFrameScheme::new(RatioFrameConfig::with_spacing(t, r_max, deta))?;
    let windows = ladder.iter().map(|&r| Window::new(&scheme, r)).collect::<Result<Vec<_>>>()?;
    Ok((scheme, windows))
}
