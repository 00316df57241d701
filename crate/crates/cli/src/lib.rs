//! Command-line runner: configuration, orchestration and on-disk outputs.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, OUT_ENV};
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "spdelab", version, about = "Stochastic heat equation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the replica ensemble for each R and write summary CSVs
    Simulate(RunArgs),
    /// Ensemble plus KDE density grids, distances and a rate fit
    Density(RunArgs),
    /// Tangent-augmented ensemble with the Stein-bound ingredients
    Stein(RunArgs),
    /// Re-fit a rate from an existing CSV
    Rates {
        /// results CSV (for example results.csv or stein.csv)
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "sup_dist")]
        column: String,
    },
    /// Run every appendix check; exits nonzero if any fails
    Verify(RunArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub preset: Option<String>,
    /// comma-separated list of R values
    #[arg(long = "r-ladder")]
    pub r_ladder: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// any other config key, as key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// test hook: scales every Φ evaluation in the verifier
    #[arg(long = "phi-scale", hide = true)]
    pub phi_scale: Option<f64>,
}

impl RunArgs {
    /// File values first, then flags; the output root also honours [`OUT_ENV`].
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut map = match &self.config {
            Some(p) => config::read_config_file(p)?,
            None => BTreeMap::new(),
        };
        for kv in &self.set {
            let parsed = config::parse_config(kv)?;
            map.extend(parsed);
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        put("seed", self.seed.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("case", self.case.clone());
        put("preset", self.preset.clone());
        put("r_ladder", self.r_ladder.clone());
        put("t_end", self.t.map(|v| v.to_string()));
        put("replicas", self.replicas.map(|v| v.to_string()));
        put("phi_scale", self.phi_scale.map(|v| v.to_string()));
        RunConfig::resolve(&map, std::env::var(OUT_ENV).ok(), self.out.is_some())
    }
}

/// Parses arguments and runs one subcommand; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let outcome = match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(&a.resolve()?)?,
        Command::Density(a) => commands::cmd_density(&a.resolve()?)?,
        Command::Stein(a) => commands::cmd_stein(&a.resolve()?)?,
        Command::Verify(a) => commands::cmd_verify(&a.resolve()?)?,
        Command::Rates { input, column } => {
            let (path, f) = commands::cmd_rates(input, column)?;
            println!("{column}: slope {:.4} ± {:.4} -> {}", f.slope, f.slope_stderr, path.display());
            return Ok(0);
        }
    };
    for line in &outcome.log {
        println!("{line}");
    }
    println!("{} ({})", outcome.dir.display(), outcome.manifest.status);
    Ok(if outcome.success() { 0 } else { 1 })
}
