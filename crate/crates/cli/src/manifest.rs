use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{io_err, CliResult};

/// File written next to every command's outputs.
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Effective settings after merging flags, config file and defaults.
    pub config: serde_json::Value,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit_hash: Option<String>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `SOURCE_DATE_EPOCH` when set, otherwise the wall clock.
    pub created_at: String,
    pub results: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

/// Digests of a file, or of every file below a directory in name order.
/// `label` replaces the leading `path` in the recorded names.
pub fn digest_tree(path: &Path, label: &str) -> CliResult<Vec<FileDigest>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e.path().unwrap_or(path).to_path_buf();
            gridtwin::Error::io(p, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(path).unwrap_or(entry.path());
        let name = if rel.as_os_str().is_empty() {
            label.to_string()
        } else {
            Path::new(label).join(rel).to_string_lossy().into_owned()
        };
        out.push(FileDigest {
            path: name,
            sha256: digest_file(entry.path())?,
        });
    }
    Ok(out)
}

pub fn creation_time() -> String {
    let from_env = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0));
    from_env.unwrap_or_else(Utc::now).to_rfc3339()
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> RunManifest {
        let config_hash = sha256_hex(config.to_string().as_bytes());
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            config_hash,
            circuit_hash: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            created_at: creation_time(),
            results: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, path: &Path, label: &str) -> CliResult<()> {
        self.inputs.extend(digest_tree(path, label)?);
        Ok(())
    }

    /// Records every file already in `out_dir` and writes the manifest there.
    pub fn finish(mut self, out_dir: &Path) -> CliResult<RunManifest> {
        self.outputs = digest_tree(out_dir, "")?
            .into_iter()
            .filter(|d| d.path != MANIFEST_FILE)
            .collect();
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(self)
    }
}
