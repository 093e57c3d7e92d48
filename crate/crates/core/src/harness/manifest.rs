use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command invocation: what was asked, what was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub files: Vec<ManifestFile>,
    pub metrics: serde_json::Value,
}

impl RunManifest {
    pub fn begin(command: &str, seed: u64, config: serde_json::Value) -> Self {
        let now = Utc::now();
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            started: now,
            finished: now,
            files: Vec::new(),
            metrics: serde_json::Value::Null,
        }
    }

    /// Hash `files` (inside `dir`), stamp the end time and write
    /// `manifest.json`.
    pub fn finish(mut self, dir: &Path, files: &[PathBuf], metrics: serde_json::Value) -> Result<Self> {
        self.files = files
            .iter()
            .map(|f| {
                let rel = f.strip_prefix(dir).unwrap_or(f);
                let bytes = std::fs::metadata(f).map_err(|e| Error::io(f, e))?.len();
                Ok(ManifestFile {
                    path: rel.to_string_lossy().into_owned(),
                    sha256: io::sha256_file(f)?,
                    bytes,
                })
            })
            .collect::<Result<_>>()?;
        self.metrics = metrics;
        self.finished = Utc::now();
        io::write_json(&dir.join(MANIFEST_FILE), &self)?;
        Ok(self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        io::read_json(&dir.join(MANIFEST_FILE))
    }

    /// Re-hash every listed file; the first mismatch is a format error.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let p = dir.join(&f.path);
            let h = io::sha256_file(&p)?;
            if h != f.sha256 {
                return Err(Error::format(p, format!("hash {h} differs from manifest {}", f.sha256)));
            }
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.path == name)
    }
}
