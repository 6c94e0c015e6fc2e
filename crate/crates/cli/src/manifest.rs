//! Run manifests: every command writes one, listing the exact inputs
//! (with digests), the effective config, the master seed, and every file
//! the run produced. Re-running with the same inputs and seed reproduces
//! the numeric outputs byte for byte; only `timing_ms` varies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
    /// Input path -> SHA-256 of its bytes.
    pub input_digests: BTreeMap<String, String>,
    /// Every file this run wrote, including this manifest.
    pub outputs: Vec<String>,
    /// Free-form per-run details (e.g. effective grids per construct).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    pub timing_ms: u128,
}

/// Collects inputs/outputs during a run and finalizes the manifest file.
pub struct ManifestBuilder {
    command: String,
    master_seed: u64,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    details: BTreeMap<String, serde_json::Value>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &Config) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            master_seed: config.seed,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            details: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    /// Records an input file and returns its digest.
    pub fn record_input(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("input not found: {}", path.display()))?;
        let digest = hex_digest(&bytes);
        self.inputs
            .insert(path.display().to_string(), digest.clone());
        Ok(digest)
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn record_detail(&mut self, key: &str, value: serde_json::Value) {
        self.details.insert(key.to_string(), value);
    }

    /// Writes `<command>_manifest.json` into `out_dir`.
    pub fn write(mut self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(format!("{}_manifest.json", self.command));
        self.outputs.push(path.display().to_string());
        self.outputs.sort();
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: self.master_seed,
            config: self.config,
            input_digests: self.inputs,
            outputs: self.outputs,
            details: self.details,
            timing_ms: self.started.elapsed().as_millis(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, json)
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(path)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
