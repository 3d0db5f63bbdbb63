//! JSON run manifest: enough to reproduce any artifact from scratch.

use crate::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved configuration (after flag overrides).
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub spacing_nm: f64,
    pub versions: Versions,
    pub timings_ms: Vec<(String, u128)>,
    pub artifacts: Vec<PathBuf>,
    pub unix_time_s: u64,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub mpm_cli: &'static str,
    pub mpm_core: &'static str,
}

pub fn config_hash(config: &RunConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(&canonical);
    format!("{:x}", h.finalize())
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, seed: Option<u64>, spacing_nm: f64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_sha256: config_hash(config),
            seed,
            spacing_nm,
            versions: Versions {
                mpm_cli: env!("CARGO_PKG_VERSION"),
                mpm_core: env!("CARGO_PKG_VERSION"),
            },
            timings_ms: Vec::new(),
            artifacts: Vec::new(),
            unix_time_s: SystemTime::now()
                .duration_since(SystemTime::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn record_timing(&mut self, label: &str, ms: u128) {
        self.timings_ms.push((label.to_string(), ms));
    }

    pub fn record_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        let path = out_dir.join(format!("manifest-{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
