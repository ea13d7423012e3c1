//! Content-addressed store for solved fields.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use jobswitch_core::obstacle::{ObstacleProblem, SolutionField};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::CacheMode;
use crate::RunError;

/// Hex SHA-256 of the JSON form of `value`.
pub fn hash_of<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("key serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct FieldCache {
    dir: PathBuf,
    mode: CacheMode,
}

impl FieldCache {
    pub fn new(dir: PathBuf, mode: CacheMode) -> Self {
        Self { dir, mode }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.field"))
    }

    /// A stored field for `key`, if the mode allows reading and the stored
    /// grid matches `problem`. Unreadable entries count as misses.
    pub fn load(&self, key: &str, problem: &ObstacleProblem) -> Option<SolutionField> {
        if !self.mode.reads() {
            return None;
        }
        let f = File::open(self.path(key)).ok()?;
        SolutionField::read_binary(BufReader::new(f), problem).ok()
    }

    pub fn store(&self, key: &str, field: &SolutionField) -> Result<(), RunError> {
        if !self.mode.writes() {
            return Ok(());
        }
        std::fs::create_dir_all(&self.dir).map_err(|e| RunError::io(&self.dir, e))?;
        let path = self.path(key);
        // write then rename so a crashed run never leaves a truncated entry
        let tmp = path.with_extension("tmp");
        let f = File::create(&tmp).map_err(|e| RunError::io(&tmp, e))?;
        field.write_binary(BufWriter::new(f))?;
        std::fs::rename(&tmp, &path).map_err(|e| RunError::io(&path, e))?;
        Ok(())
    }
}
