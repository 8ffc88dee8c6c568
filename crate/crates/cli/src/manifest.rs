//! Run manifests: every command writes one JSON file tying its outputs to the
//! exact configuration, seed and library version that produced them.
//!
//! Manifests carry no timestamps, so re-running a command with the same
//! inputs reproduces every output byte for byte.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub library_version: &'a str,
    pub config_sha256: String,
    pub seed: u64,
    pub config: &'a RunConfig,
    /// Extra command-specific fields (chosen K, dropped draws, ...).
    pub details: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    config_bytes: &[u8],
    details: serde_json::Value,
) -> std::io::Result<()> {
    let manifest = Manifest {
        command,
        library_version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(config_bytes),
        seed: config.seed,
        config,
        details,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("manifest.json"), text)
}
