use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = concat!("rusamp ", env!("CARGO_PKG_VERSION"));

/// Provenance written next to every output file.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub output: String,
    pub config: Value,
}

/// SHA-256 of the compact JSON form of `config`. Object keys are sorted, so
/// equal configurations hash equally regardless of construction order.
pub fn config_hash(config: &Value) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, output: &str, config: Value) -> Self {
        RunManifest {
            command: command.into(),
            config_hash: config_hash(&config),
            seed,
            tool_version: TOOL_VERSION.into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            output: output.into(),
            config,
        }
    }
}

/// `<stem>.manifest.json` beside `path`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}.manifest.json"))
}

/// Writes `contents` to `dir/name` and its manifest.
pub fn write_with_manifest(
    dir: &Path,
    name: &str,
    contents: &str,
    command: &str,
    seed: u64,
    config: &Value,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    let manifest = RunManifest::new(command, seed, name, config.clone());
    let mpath = manifest_path(&path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&mpath, text).map_err(|e| CliError::io(&mpath, e))?;
    Ok(path)
}
