//! Run manifests: every command records its resolved config, config hash,
//! seed, and version, so any run can be replayed exactly. Timestamps are
//! deliberately omitted to keep reruns byte-identical.

use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_completed: Option<usize>,
    pub config: ExperimentConfig,
}

/// SHA-256 of the resolved config's canonical TOML form.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = toml::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn new_manifest(command: &str, cfg: &ExperimentConfig) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        steps_completed: None,
        config: cfg.clone(),
    }
}

pub fn write_manifest(dir: &Path, name: &str, manifest: &RunManifest) -> Result<()> {
    crate::common::write_json(&dir.join(name), manifest)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
