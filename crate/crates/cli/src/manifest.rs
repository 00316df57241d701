use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Abort fraction above which a run is marked failed.
pub const MAX_ABORT_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub aborted_replicas: usize,
    pub total_replicas: usize,
    pub status: String,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.hash(command),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now_unix(),
            finished_unix: 0.0,
            aborted_replicas: 0,
            total_replicas: 0,
            status: "running".into(),
            notes: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == "failed"
    }

    /// Writes `manifest.json` into `dir` via a temporary file and a rename.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = now_unix();
        if self.status == "running" {
            self.status = "ok".into();
        }
        let path = dir.join("manifest.json");
        let tmp = dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

/// Writes a CSV whose first line names the config hash; returns the file name.
pub fn write_csv(dir: &Path, name: &str, hash: &str, body: &str) -> Result<String> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, format!("# config_hash={hash}\n{body}")).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, &path)?;
    Ok(name.to_string())
}
