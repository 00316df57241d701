use crate::error::{Error, Result};

const BINOM: [[f64; 9]; 9] = {
    let mut t = [[0.0; 9]; 9];
    let mut n = 0;
    while n < 9 {
        t[n][0] = 1.0;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0.0 };
            k += 1;
        }
        n += 1;
    }
    t
};

/// Count, mean and central moment sums M_p = Σ (x − mean)^p for p = 2..=8.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m: [f64; 9],
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        let one = Moments {
            n: 1,
            mean: x,
            m: [0.0; 9],
        };
        self.merge(&one);
    }

    /// Pairwise update of all central sums.
    pub fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = o.clone();
            return;
        }
        let na = self.n as f64;
        let nb = o.n as f64;
        let n = na + nb;
        let d = o.mean - self.mean;
        let ca = -nb * d / n;
        let cb = na * d / n;
        let get = |mm: &[f64; 9], cnt: f64, q: usize| match q {
            0 => cnt,
            1 => 0.0,
            _ => mm[q],
        };
        let mut out = [0.0; 9];
        for p in 2..=8 {
            let mut acc = 0.0;
            let mut pa = 1.0;
            let mut pb = 1.0;
            for k in 0..=p {
                acc += BINOM[p][k] * (get(&self.m, na, p - k) * pa + get(&o.m, nb, p - k) * pb);
                pa *= ca;
                pb *= cb;
            }
            out[p] = acc;
        }
        self.mean += nb * d / n;
        self.m = out;
        self.n += o.n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m[2] / (self.n as f64 - 1.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Population central moment of order p.
    pub fn central(&self, p: usize) -> f64 {
        match p {
            0 => 1.0,
            1 => 0.0,
            _ => self.m[p] / self.n as f64,
        }
    }

    pub fn skewness(&self) -> f64 {
        self.central(3) / self.central(2).powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        self.central(4) / self.central(2).powi(2) - 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaSample {
    pub f: f64,
    pub dvf: Option<f64>,
    pub dvdvf: Option<f64>,
}

pub const DEFAULT_SAMPLE_CAP: usize = 1_000_000;

/// Mergeable ensemble summary: streaming moments, a capped raw-sample store and the
/// per-replica tangent scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    pub config_key: String,
    pub moments: Moments,
    pub samples: Vec<f64>,
    pub cap: usize,
    pub dvf: Vec<f64>,
    pub dvdvf: Vec<f64>,
}

impl EnsembleAccumulator {
    pub fn new(config_key: impl Into<String>) -> Self {
        Self::with_cap(config_key, DEFAULT_SAMPLE_CAP)
    }

    pub fn with_cap(config_key: impl Into<String>, cap: usize) -> Self {
        EnsembleAccumulator {
            config_key: config_key.into(),
            moments: Moments::new(),
            samples: Vec::new(),
            cap,
            dvf: Vec::new(),
            dvdvf: Vec::new(),
        }
    }

    pub fn accumulate(&mut self, config_key: &str, s: ReplicaSample) -> Result<()> {
        if config_key != self.config_key {
            return Err(Error::ConfigMismatch(format!(
                "accumulator '{}' got a replica from '{config_key}'",
                self.config_key
            )));
        }
        self.moments.push(s.f);
        if self.samples.len() < self.cap {
            self.samples.push(s.f);
            if let Some(v) = s.dvf {
                self.dvf.push(v);
            }
            if let Some(v) = s.dvdvf {
                self.dvdvf.push(v);
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if other.config_key != self.config_key {
            return Err(Error::ConfigMismatch(format!(
                "cannot merge '{}' into '{}'",
                other.config_key, self.config_key
            )));
        }
        self.moments.merge(&other.moments);
        let room = self.cap.saturating_sub(self.samples.len());
        let take = room.min(other.samples.len());
        self.samples.extend_from_slice(&other.samples[..take]);
        self.dvf.extend_from_slice(&other.dvf[..take.min(other.dvf.len())]);
        self.dvdvf.extend_from_slice(&other.dvdvf[..take.min(other.dvdvf.len())]);
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.moments.n
    }

    pub fn sample_variance(&self) -> f64 {
        self.moments.variance()
    }
}

/// Centers and scales by the sample mean and (unbiased) standard deviation.
pub fn self_normalize(xs: &[f64]) -> Vec<f64> {
    let m = Moments::from_slice(xs);
    let sd = m.std_dev();
    xs.iter().map(|x| (x - m.mean) / sd).collect()
}
