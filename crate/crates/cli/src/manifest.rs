//! Run manifest: the one output that carries timestamps. Everything else a
//! command writes is byte-deterministic under a fixed seed.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

#[derive(Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    /// FNV-1a hash of the fully-resolved configuration plus seed.
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
}

pub fn fnv1a_hex(text: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(canonical_config: &str, seed: u64, started_unix: f64) -> Self {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: fnv1a_hex(canonical_config),
            seed,
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
        }
    }

    pub fn write(mut self, path: &Path) -> Result<(), CliError> {
        self.finished_unix = unix_now();
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| CliError::Numerical(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))
    }
}
