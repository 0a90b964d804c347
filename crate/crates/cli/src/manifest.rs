//! Run manifests and the eigenvalue cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CACHE_ENV: &str = "TOPOFLAT_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub target: String,
    pub format: String,
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub model_hash: Option<String>,
    /// Canonical model text, used on replay.
    pub model: Option<String>,
    pub params: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub threads: Option<usize>,
    pub started_unix: u64,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputDigest>,
    pub provenance: Vec<String>,
    pub cache: BTreeMap<String, usize>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            origin: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialization");
        std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Directory of cached spectra, from the environment.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{}.eig", sha256_hex(key.as_bytes())))
}

/// Cached `(eigenvalues, sites)` for `key`, if present and well formed.
pub fn cache_get(dir: &Path, key: &str) -> Option<(Vec<f64>, usize)> {
    let bytes = std::fs::read(cache_path(dir, key)).ok()?;
    if bytes.len() < 8 || (bytes.len() - 8) % 8 != 0 {
        return None;
    }
    let sites = u64::from_le_bytes(bytes[..8].try_into().ok()?) as usize;
    let vals = bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Some((vals, sites))
}

pub fn cache_put(dir: &Path, key: &str, vals: &[f64], sites: usize) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut bytes = Vec::with_capacity(8 + 8 * vals.len());
    bytes.extend_from_slice(&(sites as u64).to_le_bytes());
    for v in vals {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let path = cache_path(dir, key);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}
