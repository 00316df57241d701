//! Discretized space-time white noise: keyed counter-based streams and replayable tapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub l: f64,
    pub n_x: usize,
    pub t_end: f64,
    pub n_t: usize,
}

impl GridSpec {
    pub fn new(l: f64, n_x: usize, t_end: f64, n_t: usize) -> Result<Self> {
        if !(l > 0.0 && t_end > 0.0) || n_x == 0 || n_t == 0 {
            return domain("grid needs L > 0, t_end > 0 and positive cell counts");
        }
        if n_x % 2 != 0 {
            return domain(format!("n_x must be even so x = 0 is a node, got {n_x}"));
        }
        let g = GridSpec { l, n_x, t_end, n_t };
        if g.dt() > 0.5 * g.dx() * g.dx() * (1.0 + 1e-12) {
            return domain(format!(
                "unstable grid: dt = {} exceeds dx²/2 = {}",
                g.dt(),
                0.5 * g.dx() * g.dx()
            ));
        }
        Ok(g)
    }

    /// Smallest grid with spacing `dx`, dt = dx²/2 (or finer) and L ≥ r_max + 6√t_end.
    pub fn auto(r_max: f64, t_end: f64, dx: f64) -> Result<Self> {
        let half = ((r_max + 6.0 * t_end.sqrt()) / dx).ceil() as usize;
        let n_t = (t_end / (0.5 * dx * dx) - 1e-9).ceil().max(1.0) as usize;
        GridSpec::new(half as f64 * dx, 2 * half, t_end, n_t)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n_x as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_t as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.dx()
    }

    pub fn center(&self) -> usize {
        self.n_x / 2
    }

    /// Node index nearest to `x` (clamped to the grid).
    pub fn node(&self, x: f64) -> usize {
        let j = ((x + self.l) / self.dx()).round();
        j.clamp(0.0, (self.n_x - 1) as f64) as usize
    }

    pub fn check_truncation(&self, r_max: f64) -> Result<()> {
        let need = r_max + 6.0 * self.t_end.sqrt();
        if self.l + 1e-9 < need {
            return domain(format!("L = {} is below R_max + 6√t = {need}", self.l));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    Solution = 0,
    Derivative = 1,
    Quadrature = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replica_id: u64,
    pub lane: Lane,
}

impl StreamKey {
    pub fn new(master_seed: u64, replica_id: u64, lane: Lane) -> Self {
        StreamKey {
            master_seed,
            replica_id,
            lane,
        }
    }
}

/// Standard normal stream for one key. Slices are independent seek points, so any
/// slice can be regenerated without touching the others.
#[derive(Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

pub fn derive_stream(key: StreamKey) -> NormalStream {
    let mut rng = ChaCha8Rng::seed_from_u64(key.master_seed);
    rng.set_stream(key.replica_id.wrapping_mul(4).wrapping_add(key.lane as u64));
    NormalStream { rng }
}

impl NormalStream {
    pub fn seek_slice(&mut self, slice: usize) {
        self.rng.set_word_pos((slice as u128) << 32);
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_slice(&mut self, slice: usize, out: &mut [f64]) {
        self.seek_slice(slice);
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Anything that can hand out the standard normal draws of a time slice.
pub trait NoiseSource {
    fn key(&self) -> StreamKey;
    fn fill(&mut self, slice: usize, out: &mut [f64]);
}

impl NoiseSource for (StreamKey, NormalStream) {
    fn key(&self) -> StreamKey {
        self.0
    }
    fn fill(&mut self, slice: usize, out: &mut [f64]) {
        self.1.fill_slice(slice, out);
    }
}

pub fn keyed_source(key: StreamKey) -> (StreamKey, NormalStream) {
    (key, derive_stream(key))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TapeStorage {
    InMemory(Vec<f64>),
    Regenerable,
}

#[derive(Clone)]
pub struct NoiseTape {
    pub grid: GridSpec,
    pub key: StreamKey,
    pub storage: TapeStorage,
}

pub const DEFAULT_TAPE_BUDGET: usize = 512 << 20;

pub fn sample_tape(grid: GridSpec, key: StreamKey) -> Result<NoiseTape> {
    sample_tape_with_budget(grid, key, DEFAULT_TAPE_BUDGET)
}

pub fn sample_tape_with_budget(grid: GridSpec, key: StreamKey, budget: usize) -> Result<NoiseTape> {
    let needed = grid.n_t * grid.n_x * std::mem::size_of::<f64>();
    if needed > budget {
        return Err(Error::MemoryBudget { needed, budget });
    }
    let mut stream = derive_stream(key);
    let mut data = vec![0.0; grid.n_t * grid.n_x];
    for (n, row) in data.chunks_mut(grid.n_x).enumerate() {
        stream.fill_slice(n, row);
    }
    Ok(NoiseTape {
        grid,
        key,
        storage: TapeStorage::InMemory(data),
    })
}

impl NoiseTape {
    pub fn regenerable(grid: GridSpec, key: StreamKey) -> NoiseTape {
        NoiseTape {
            grid,
            key,
            storage: TapeStorage::Regenerable,
        }
    }

    /// All-zero in-memory tape (noiseless runs).
    pub fn zeros(grid: GridSpec, key: StreamKey) -> NoiseTape {
        NoiseTape {
            grid,
            key,
            storage: TapeStorage::InMemory(vec![0.0; grid.n_t * grid.n_x]),
        }
    }

    pub fn is_replayable(&self) -> bool {
        true
    }

    /// Raw draw ξ^n_j.
    pub fn draw(&self, n: usize, j: usize) -> f64 {
        match &self.storage {
            TapeStorage::InMemory(d) => d[n * self.grid.n_x + j],
            TapeStorage::Regenerable => {
                let mut row = vec![0.0; self.grid.n_x];
                self.reader().fill(n, &mut row);
                row[j]
            }
        }
    }

    /// Walsh increment ΔW^n_j = ξ^n_j √(dt dx).
    pub fn increment(&self, n: usize, j: usize) -> f64 {
        self.draw(n, j) * (self.grid.dt() * self.grid.dx()).sqrt()
    }

    pub fn reader(&self) -> TapeReader<'_> {
        TapeReader {
            tape: self,
            stream: match self.storage {
                TapeStorage::Regenerable => Some(derive_stream(self.key)),
                TapeStorage::InMemory(_) => None,
            },
        }
    }

    pub fn check_matches(&self, grid: &GridSpec, key: StreamKey) -> Result<()> {
        if self.key != key {
            return Err(Error::TapeMismatch(format!("tape key {:?} vs path key {:?}", self.key, key)));
        }
        if self.grid != *grid {
            return Err(Error::TapeMismatch("tape grid differs from path grid".into()));
        }
        Ok(())
    }
}

pub struct TapeReader<'a> {
    tape: &'a NoiseTape,
    stream: Option<NormalStream>,
}

impl NoiseSource for TapeReader<'_> {
    fn key(&self) -> StreamKey {
        self.tape.key
    }
    fn fill(&mut self, slice: usize, out: &mut [f64]) {
        match (&self.tape.storage, self.stream.as_mut()) {
            (TapeStorage::InMemory(d), _) => {
                let n = self.tape.grid.n_x;
                out.copy_from_slice(&d[slice * n..(slice + 1) * n]);
            }
            (TapeStorage::Regenerable, Some(s)) => s.fill_slice(slice, out),
            (TapeStorage::Regenerable, None) => unreachable!(),
        }
    }
}
