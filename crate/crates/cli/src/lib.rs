//! Configuration, staged pipeline, caching and exports behind the
//! `jobswitch` command.

use std::path::Path;

pub mod cache;
pub mod config;
pub mod export;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use manifest::RunManifest;
pub use pipeline::{run_pipeline, Method, Outcome, RunRequest, Stage};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] jobswitch_core::Error),
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad configuration or a violated model assumption.
    pub const VALIDATION: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const VERIFICATION: i32 = 4;
    /// I/O trouble outside the pipeline's control.
    pub const IO: i32 = 1;
}
