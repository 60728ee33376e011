//! Run manifest written next to every command's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use crowdloc::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_digest: String,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        let digest = Sha256::digest(config.to_string().as_bytes());
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn store(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|source| Error::Io { path: path.clone(), source })?;
        Ok(path)
    }
}
