//! Output files and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes `bytes` to `path` through a sibling temp file and a rename, so a
/// reader never sees a half-written file under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// The output directory and what has been written to it.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl Outputs {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Renders into memory with `fill`, then writes atomically.
    pub fn write<F>(&mut self, name: &str, fill: F) -> io::Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        write_atomic(&path, &buf)?;
        self.records.retain(|r| r.file != name);
        self.records.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(&buf),
            bytes: buf.len(),
        });
        Ok(path)
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskRecord {
    pub name: String,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TaskRecord {
    pub fn ok(name: impl Into<String>) -> Self {
        TaskRecord {
            name: name.into(),
            status: TaskStatus::Ok,
            error: None,
        }
    }

    pub fn failed(name: impl Into<String>, error: impl ToString) -> Self {
        TaskRecord {
            name: name.into(),
            status: TaskStatus::Failed,
            error: Some(error.to_string()),
        }
    }

    pub fn skipped(name: impl Into<String>, why: impl ToString) -> Self {
        TaskRecord {
            name: name.into(),
            status: TaskStatus::Skipped,
            error: Some(why.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Partial,
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Failed => 1,
            RunStatus::Partial => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub verb: String,
    /// SHA-256 of the resolved config as embedded below.
    pub config_sha256: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub jobs: usize,
    pub status: RunStatus,
    pub tasks: Vec<TaskRecord>,
    pub outputs: Vec<OutputRecord>,
    pub config: RunConfig,
}

pub fn config_hash(config: &RunConfig) -> String {
    // serde_json keeps struct field order, so this is stable
    sha256_hex(serde_json::to_string(config).unwrap_or_default().as_bytes())
}
