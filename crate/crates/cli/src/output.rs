//! Run outputs: atomic file writes, checksums, manifest and summary.
//!
//! Data files are written as `<name>.partial` and renamed into place, so an
//! aborted run never leaves a truncated file under its final name. Float
//! columns use Rust's shortest-roundtrip formatting, which is
//! platform-independent, so identical runs produce byte-identical CSVs.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Per-run manifest: what ran, when, and the checksum of every file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub kind: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputRecord>,
}

/// One named pass/fail verdict in the run summary.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    pub fn new(
        name: impl Into<String>,
        passed: bool,
        value: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub kind: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

/// Collects files for one run directory, checksumming as it goes.
pub struct RunWriter {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
    started_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self, OutputError> {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            started_unix: unix_now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Atomically write one named output file and record its checksum.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), OutputError> {
        let partial = self.dir.join(format!("{name}.partial"));
        let path = self.dir.join(name);
        let io = |source| OutputError::Io {
            path: path.clone(),
            source,
        };
        let mut file = fs::File::create(&partial).map_err(io)?;
        file.write_all(bytes).map_err(io)?;
        file.sync_all().map_err(io)?;
        drop(file);
        fs::rename(&partial, &path).map_err(io)?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.outputs.push(OutputRecord {
            name: name.to_string(),
            sha256: hex(&hasher.finalize()),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), OutputError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write the summary and manifest, finishing the run.
    pub fn finish(
        mut self,
        kind: &str,
        config_hash: u64,
        master_seed: u64,
        summary: &RunSummary,
    ) -> Result<RunManifest, OutputError> {
        self.write_json("summary.json", summary)?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            config_hash: format!("{config_hash:016x}"),
            master_seed,
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            outputs: self.outputs.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        let partial = self.dir.join("manifest.json.partial");
        let io = |source| OutputError::Io {
            path: path.clone(),
            source,
        };
        fs::write(&partial, text.as_bytes()).map_err(io)?;
        fs::rename(&partial, &path).map_err(io)?;
        Ok(manifest)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex(&hasher.finalize())
}

/// A small deterministic CSV builder (shortest-roundtrip float formatting).
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        buf.push_str(header);
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match f {
                CsvField::Int(v) => self.buf.push_str(&v.to_string()),
                CsvField::Float(v) => self.buf.push_str(&format!("{v}")),
                CsvField::Str(v) => self.buf.push_str(v),
            }
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

pub enum CsvField<'a> {
    Int(i64),
    Float(f64),
    Str(&'a str),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting_is_roundtrip_stable() {
        let mut csv = Csv::new("a,b");
        csv.row(&[CsvField::Int(3), CsvField::Float(0.1 + 0.2)]);
        csv.row(&[CsvField::Str("x"), CsvField::Float(1.0 / 3.0)]);
        let text = String::from_utf8(csv.into_bytes()).unwrap();
        assert_eq!(text, "a,b\n3,0.30000000000000004\nx,0.3333333333333333\n");
    }

    #[test]
    fn writes_are_atomic_and_checksummed() {
        let dir = std::env::temp_dir().join(format!("swe-out-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let mut w = RunWriter::create(&dir).unwrap();
        w.write("data.csv", b"x\n1\n").unwrap();
        assert!(dir.join("data.csv").exists());
        assert!(!dir.join("data.csv.partial").exists());
        let summary = RunSummary {
            kind: "simulate".into(),
            config_hash: "00".into(),
            master_seed: 1,
            pass: true,
            checks: vec![],
        };
        let manifest = w.finish("simulate", 0x42, 1, &summary).unwrap();
        assert_eq!(manifest.outputs.len(), 2);
        assert_eq!(manifest.outputs[0].name, "data.csv");
        assert_eq!(manifest.outputs[0].sha256, sha256_hex(b"x\n1\n"));
        assert!(dir.join("manifest.json").exists());
        let _ = fs::remove_dir_all(&dir);
    }
}
