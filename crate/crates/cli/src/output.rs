//! Output files and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Writes files under one directory and remembers their checksums. Safe to
/// share between replica workers.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Mutex<Vec<OutputFile>>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Mutex::new(Vec::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        let entry = OutputFile { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 };
        self.files.lock().expect("output registry poisoned").push(entry);
        Ok(())
    }

    pub fn write_json(&self, rel: &str, value: &impl Serialize) -> io::Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        text.push(b'\n');
        self.write(rel, &text)
    }

    /// All files written so far, sorted by path.
    pub fn files(&self) -> Vec<OutputFile> {
        let mut v = self.files.lock().expect("output registry poisoned").clone();
        v.sort_by(|a, b| a.path.cmp(&b.path));
        v
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    InvariantViolation,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaEntry {
    pub index: usize,
    pub seed: u64,
}

/// One cell of a sweep plan and how it ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellEntry {
    pub cell: usize,
    pub n: usize,
    /// The drift as configured: absolute, or a multiple of `mu_c_hat`.
    pub drift_spec: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub replicas: Vec<ReplicaEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellEntry>>,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub jobs: Option<usize>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
