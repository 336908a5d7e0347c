//! Run manifests. A manifest holds no timestamps, host names or worker
//! counts, so two runs of the same config write identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::LabError;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub seed_defaulted: bool,
    /// Capped evaluations, clamped transforms, degeneracies, warnings.
    pub counters: BTreeMap<String, u64>,
    /// Computed quantities such as `M_p` and `Λ_p`.
    pub values: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, Value>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of the config, so formatting and
/// comments in the TOML file do not change it. The output directory is
/// left out: it does not affect any output.
pub fn config_hash(cfg: &RunConfig) -> Result<String, LabError> {
    let canonical = RunConfig { output_dir: Default::default(), ..cfg.clone() };
    Ok(sha256_hex(&serde_json::to_vec(&canonical)?))
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Result<Self, LabError> {
        Ok(Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(cfg)?,
            seed: cfg.seed(),
            seed_defaulted: cfg.seed_defaulted(),
            counters: BTreeMap::new(),
            values: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn count(&mut self, key: &str, n: u64) {
        *self.counters.entry(key.into()).or_insert(0) += n;
    }

    pub fn value(&mut self, key: &str, v: impl Into<Value>) {
        self.values.insert(key.into(), v.into());
    }

    pub fn verdict(&mut self, key: &str, v: impl Into<Value>) {
        self.verdicts.insert(key.into(), v.into());
    }

    /// Write an artifact atomically and record its digest.
    pub fn emit(&mut self, dir: &Path, file: &str, bytes: &[u8]) -> Result<(), LabError> {
        write_atomic(&dir.join(file), bytes)?;
        self.artifacts.push(Artifact { file: file.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&dir.join(Self::file_name(&self.command)), &bytes)
    }

    pub fn read(path: &Path) -> Result<Self, LabError> {
        let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
