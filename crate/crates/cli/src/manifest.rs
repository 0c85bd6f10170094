//! Run manifest: the effective configuration, seed list, wall clock and
//! SHA-256 digests of every output file, written atomically next to them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub outputs: BTreeMap<String, String>,
}

/// Writes `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects digests of the given output files and writes `manifest.json`.
pub fn finalize(
    out_dir: &Path,
    command: &str,
    config: BTreeMap<String, String>,
    seeds: Vec<u64>,
    wall_clock_seconds: f64,
    outputs: &[PathBuf],
) -> std::io::Result<()> {
    let mut digests = BTreeMap::new();
    for p in outputs {
        let bytes = std::fs::read(p)?;
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        digests.insert(name, sha256_hex(&bytes));
    }
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        seeds,
        wall_clock_seconds,
        outputs: digests,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join("manifest.json"), json.as_bytes())
}
