//! Run manifests: every command records its resolved configuration, seed and
//! artifact list so any run can be replayed byte-for-byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shieldscatter::Result;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand that produced this run.
    pub command: String,
    /// SHA-256 of the canonical JSON encoding of `resolved`.
    pub config_hash: String,
    pub seed: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Unix seconds; informational only, outputs never embed it.
    pub timestamp: u64,
    /// The full resolved configuration needed to replay the run.
    pub resolved: serde_json::Value,
}

/// Canonical hash of a resolved configuration. `serde_json` maps are
/// BTree-backed, so key order (and therefore the hash) is stable.
pub fn config_hash(resolved: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(resolved).expect("config is serializable");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, resolved: serde_json::Value, artifacts: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash: config_hash(&resolved),
            seed,
            artifacts,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            resolved,
        }
    }

    /// Write into `dir` as [`MANIFEST_NAME`]; returns the path written.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        serde_json::to_writer_pretty(&mut file, self)?;
        use std::io::Write;
        file.flush()?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(path)?,
        ))?)
    }
}
