//! Run manifests: what ran, on which inputs, producing which outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_hash: String,
    pub seeds: Map<String, Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub tool_version: String,
    pub wall_clock_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

/// Collects manifest fields while a command runs.
pub struct ManifestBuilder {
    command_line: Vec<String>,
    config: Value,
    seeds: Map<String, Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command_line: Vec<String>, config: Value) -> Self {
        Self {
            command_line,
            config,
            seeds: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value.into());
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn finish(self) -> Result<RunManifest> {
        let inputs = self.inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?;
        let outputs = self.outputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?;
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        Ok(RunManifest {
            command_line: self.command_line,
            config_hash: sha256_hex(&config),
            seeds: self.seeds,
            inputs,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        })
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
