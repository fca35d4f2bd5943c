//! Run directory: CSV artifacts plus a manifest with their digests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use skewmda::oracles::ParameterSummary;

use crate::error::{io_err, Result};

/// Shortest text that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord { name: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(&self.root)(e.into_error()))?;
        self.write(name, bytes)
    }

    /// Writes `manifest.json`: `meta` plus the digest of every file written
    /// so far.
    pub fn manifest(&mut self, meta: serde_json::Value) -> Result<()> {
        let mut doc = meta;
        doc["files"] = serde_json::to_value(&self.files).expect("file records serialize");
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(io_err(&path))
    }
}

/// `diagnostics_summary.csv` and `diagnostics_acf.csv` for each chain.
pub fn write_diagnostics(dir: &mut RunDir, chains: &[Vec<ParameterSummary>]) -> Result<()> {
    let mut summary = Vec::new();
    let mut acf = Vec::new();
    for (c, params) in chains.iter().enumerate() {
        let chain = (c + 1).to_string();
        for s in params {
            summary.push(vec![
                chain.clone(),
                s.name.clone(),
                num(s.mean),
                num(s.sd),
                s.ess.map(num).unwrap_or_default(),
                num(s.mcse),
            ]);
            for (lag, r) in s.acf.iter().enumerate() {
                acf.push(vec![chain.clone(), s.name.clone(), lag.to_string(), num(*r)]);
            }
        }
    }
    dir.csv("diagnostics_summary.csv", &["chain", "parameter", "mean", "sd", "ess", "mcse"], summary)?;
    dir.csv("diagnostics_acf.csv", &["chain", "parameter", "lag", "acf"], acf)
}
