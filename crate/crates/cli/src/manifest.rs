use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::sha256_hex;
use crate::config::RunConfig;
use crate::RunError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Ok,
    CacheHit,
    Failed,
    /// An earlier stage failed.
    Blocked,
    /// Not requested by the verb.
    Skipped,
}

impl StageStatus {
    pub fn label(self) -> &'static str {
        match self {
            StageStatus::Ok => "ok",
            StageStatus::CacheHit => "cache-hit",
            StageStatus::Failed => "failed",
            StageStatus::Blocked => "blocked",
            StageStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub verb: String,
    pub method: String,
    pub exit_code: i32,
    /// Names of failed hard checks.
    pub failed_checks: Vec<String>,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    /// Configuration after defaults and command-line overrides.
    pub config: RunConfig,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| RunError::io(&path, e))
    }

    /// Files whose bytes on disk no longer match the recorded checksum.
    pub fn stale_files(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match std::fs::read(dir.join(&f.path)) {
                Ok(bytes) => sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}
