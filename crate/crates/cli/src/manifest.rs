use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::tables::write_json;

/// Everything needed to re-run a command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub trace_label: Option<String>,
    /// Hex SHA-256 of the input file bytes.
    pub trace_digest: Option<String>,
    pub backend: Option<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub aborted: bool,
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn begin(command: &str, command_line: &[String], config: serde_json::Value) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            command_line: command_line.to_vec(),
            config,
            trace_label: None,
            trace_digest: None,
            backend: None,
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
            aborted: false,
        }
    }

    pub fn with_trace(mut self, label: &str, path: &Path) -> Result<Self> {
        self.trace_label = Some(label.to_string());
        self.trace_digest = Some(file_digest(path)?);
        Ok(self)
    }

    pub fn finish(mut self, out_dir: &Path) -> Result<()> {
        self.finished_unix_ms = unix_ms();
        write_json(&out_dir.join("manifest.json"), &self)
    }
}
