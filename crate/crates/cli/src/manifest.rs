use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Input path to lowercase hex SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    /// Reads `path`, records its digest and returns the bytes.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(
            path.display().to_string(),
            hex::encode(Sha256::digest(&bytes)),
        );
        Ok(bytes)
    }

    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn time(&mut self, phase: impl Into<String>, seconds: f64) {
        self.timings.insert(phase.into(), seconds);
    }

    /// Writes the manifest as `<path>.manifest.json`.
    pub fn save_beside(&self, path: &Path) -> Result<PathBuf> {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let target = path.with_file_name(name);
        let json = serde_json::to_vec_pretty(self)?;
        fs::write(&target, json).with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }
}
