//! Run configuration: flat `key = value` files, flag overrides, and the result hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use spdelab::spde_engine::{CaseTag, CoefficientSpec};

/// Environment variable that overrides the output root (an explicit `--out` still wins).
pub const OUT_ENV: &str = "SPDELAB_OUT";

pub const KEYS: &[&str] = &[
    "case",
    "t_end",
    "r_ladder",
    "dx",
    "preset",
    "spline_x",
    "spline_y",
    "replicas",
    "seed",
    "workers",
    "out",
    "normalizer",
    "tangents",
    "sweep",
    "phi_scale",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    /// ensemble sample standard deviation
    Sample,
    /// continuum σ≡1 variance (quadrature)
    Quadrature,
    /// exact variance of the discrete σ≡1 scheme
    Discrete,
}

impl Normalizer {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sample" => Normalizer::Sample,
            "quadrature" => Normalizer::Quadrature,
            "discrete" => Normalizer::Discrete,
            other => bail!("unknown normalizer '{other}' (sample, quadrature or discrete)"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Normalizer::Sample => "sample",
            Normalizer::Quadrature => "quadrature",
            Normalizer::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(serialize_with = "ser_case")]
    pub case: CaseTag,
    pub t_end: f64,
    pub r_ladder: Vec<f64>,
    /// spatial step (flat) or η-spacing of the ratio frame (pam)
    pub dx: f64,
    pub preset: String,
    pub spline_x: Vec<f64>,
    pub spline_y: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub out_source: String,
    pub normalizer: Normalizer,
    pub tangents: bool,
    pub sweep: String,
    pub phi_scale: f64,
}

fn ser_case<S: serde::Serializer>(c: &CaseTag, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(c.name())
}

/// Reads a flat config file. Blank lines and `#` comments are ignored.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        let k = k.trim();
        if !KEYS.contains(&k) {
            bail!("config line {}: unknown key '{k}'", i + 1);
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split([',', ' '])
        .filter(|p| !p.is_empty())
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number '{p}'")))
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl RunConfig {
    /// Resolves a key map (file values with flag overrides already applied) into a config.
    /// `env_out` is the value of [`OUT_ENV`], if set; `flag_out` marks an explicit `--out`.
    pub fn resolve(map: &BTreeMap<String, String>, env_out: Option<String>, flag_out: bool) -> Result<Self> {
        for k in map.keys() {
            if !KEYS.contains(&k.as_str()) {
                bail!("unknown config key '{k}'");
            }
        }
        let get = |k: &str| map.get(k).map(|s| s.as_str());
        let case: CaseTag = get("case").unwrap_or("flat").parse()?;
        let t_end: f64 = get("t_end").map(str::parse).transpose()?.unwrap_or(0.5);
        if !(t_end > 0.0 && t_end.is_finite()) {
            bail!("t_end must be positive, got {t_end}");
        }
        let r_ladder = match get("r_ladder") {
            Some(s) => parse_list(s)?,
            None => match case {
                CaseTag::Flat => vec![4.0, 8.0, 16.0, 32.0],
                CaseTag::Pam => vec![8.0, 16.0, 32.0, 64.0],
            },
        };
        if r_ladder.is_empty() || r_ladder.iter().any(|r| !(*r > 0.0)) {
            bail!("r_ladder must be a non-empty list of positive values");
        }
        let dx: f64 = match get("dx") {
            Some(s) => s.parse()?,
            None => match case {
                CaseTag::Flat => 0.25,
                CaseTag::Pam => 0.2,
            },
        };
        if !(dx > 0.0) {
            bail!("dx must be positive");
        }
        let spline_x = get("spline_x").map(parse_list).transpose()?.unwrap_or_default();
        let spline_y = get("spline_y").map(parse_list).transpose()?.unwrap_or_default();
        let preset = match get("preset") {
            Some(p) => p.to_string(),
            None if !spline_x.is_empty() => "custom-spline".to_string(),
            None => match case {
                CaseTag::Flat => "two-plus-sine".to_string(),
                CaseTag::Pam => "identity".to_string(),
            },
        };
        if case == CaseTag::Pam && preset != "identity" {
            bail!("the pam case has σ(x) = x; preset must be identity");
        }
        let replicas: usize = get("replicas").map(str::parse).transpose()?.unwrap_or(10_000);
        let seed: u64 = get("seed").map(str::parse).transpose()?.unwrap_or(0);
        let workers: usize = get("workers").map(str::parse).transpose()?.unwrap_or_else(default_workers);
        if workers == 0 {
            bail!("workers must be at least 1");
        }
        let (out, out_source) = match (flag_out, env_out, get("out")) {
            (true, _, Some(o)) => (PathBuf::from(o), "flag"),
            (_, Some(e), _) if !e.is_empty() => (PathBuf::from(e), "env"),
            (_, _, Some(o)) => (PathBuf::from(o), "config"),
            _ => (PathBuf::from("runs"), "default"),
        };
        let normalizer = Normalizer::parse(get("normalizer").unwrap_or("sample"))?;
        if normalizer != Normalizer::Sample && preset != "constant-1" {
            bail!("normalizer '{}' is only known for preset constant-1", normalizer.name());
        }
        let tangents = match get("tangents").unwrap_or("false") {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => bail!("tangents must be true or false, got '{other}'"),
        };
        let sweep = get("sweep").unwrap_or("default").to_string();
        if sweep != "default" && sweep != "small" {
            bail!("sweep must be default or small");
        }
        let phi_scale: f64 = get("phi_scale").map(str::parse).transpose()?.unwrap_or(1.0);
        let cfg = RunConfig {
            case,
            t_end,
            r_ladder,
            dx,
            preset,
            spline_x,
            spline_y,
            replicas,
            seed,
            workers,
            out,
            out_source: out_source.to_string(),
            normalizer,
            tangents,
            sweep,
            phi_scale,
        };
        cfg.coefficient()?;
        Ok(cfg)
    }

    pub fn coefficient(&self) -> Result<CoefficientSpec> {
        let c = if self.preset == "custom-spline" {
            CoefficientSpec::spline(self.spline_x.clone(), self.spline_y.clone())?
        } else {
            CoefficientSpec::preset(&self.preset)?
        };
        if self.case == CaseTag::Flat {
            c.validate_flat()?;
        }
        Ok(c)
    }

    /// Canonical text of every field that affects the results of `command`.
    /// Worker count and output location are excluded: they never change the numbers.
    pub fn canonical(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={command}");
        if command == "verify" {
            let _ = writeln!(s, "sweep={}", self.sweep);
            let _ = writeln!(s, "seed={}", self.seed);
            let _ = writeln!(s, "phi_scale={:?}", self.phi_scale);
            return s;
        }
        let _ = writeln!(s, "case={}", self.case.name());
        let _ = writeln!(s, "t_end={:?}", self.t_end);
        let _ = writeln!(s, "r_ladder={}", fmt_list(&self.r_ladder));
        let _ = writeln!(s, "dx={:?}", self.dx);
        let _ = writeln!(s, "preset={}", self.preset);
        if self.preset == "custom-spline" {
            let _ = writeln!(s, "spline_x={}", fmt_list(&self.spline_x));
            let _ = writeln!(s, "spline_y={}", fmt_list(&self.spline_y));
        }
        let _ = writeln!(s, "replicas={}", self.replicas);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "normalizer={}", self.normalizer.name());
        let _ = writeln!(s, "tangents={}", self.tangents || command == "stein");
        s
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self, command: &str) -> String {
        Sha256::digest(self.canonical(command).as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut acc, b| {
                let _ = write!(acc, "{b:02x}");
                acc
            })
    }

    /// Output directory for one command: `<out>/<first 16 hex digits of the hash>`.
    pub fn run_dir(&self, command: &str) -> PathBuf {
        self.out.join(&self.hash(command)[..16])
    }
}
