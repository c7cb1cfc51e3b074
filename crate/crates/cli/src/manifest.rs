//! Run manifests and the output writer that produces them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::io::{file_digest, sha256_hex, write_atomic};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: file_digest(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to repeat a run: the fully resolved configuration can
/// be passed back with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputDigest>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Files produced by one command, written under `dir` on [`Outputs::finish`].
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Input(format!("JSON encoding failed: {e}")))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file, then the manifest listing their digests.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        if self.files.iter().any(|(n, _)| n == MANIFEST_NAME) {
            return Err(CliError::Usage(format!("{MANIFEST_NAME} is reserved")));
        }
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), bytes)?;
            manifest.outputs.push(OutputDigest {
                name: name.clone(),
                sha256: sha256_hex(bytes),
            });
        }
        manifest.finished_unix_ms = now_ms();
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Input(format!("JSON encoding failed: {e}")))?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST_NAME), &bytes)?;
        Ok(manifest)
    }
}
