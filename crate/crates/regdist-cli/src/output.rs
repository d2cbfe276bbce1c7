//! CSV tables and the run manifest.

use regdist::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// One CSV file; floats are stored in shortest round-trip form.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Rounded to 12 significant digits, for terminal summaries.
pub fn short(v: f64) -> String {
    match format!("{v:.11e}").parse::<f64>() {
        Ok(r) => format!("{r:?}"),
        Err(_) => format!("{v:?}"),
    }
}

pub fn coords(x: &[f64]) -> Vec<String> {
    x.iter().map(|v| num(*v)).collect()
}

/// `x0, x1, ...` column names.
pub fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// SHA-256 over the canonical config text and the bytes of every referenced file.
pub fn config_hash(canonical: &str, files: &[PathBuf]) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    for f in files {
        h.update(f.display().to_string().as_bytes());
        match std::fs::read(f) {
            Ok(bytes) => h.update(&bytes),
            Err(_) => h.update(b"<missing>"),
        }
    }
    format!("{:x}", h.finalize())
}

pub struct Manifest {
    pub name: String,
    pub hash: String,
    pub threads: usize,
    pub seed: u64,
    pub stages: Vec<(String, f64, Vec<String>)>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut s = String::new();
        s.push_str(&format!("name = {}\n", self.name));
        s.push_str(&format!("config_hash = {}\n", self.hash));
        s.push_str(&format!("regdist_version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("parallel = {}\n", regdist::par::is_parallel()));
        s.push_str(&format!("threads = {}\n", self.threads));
        s.push_str(&format!("seed = {}\n", self.seed));
        for (name, secs, files) in &self.stages {
            s.push_str(&format!("stage.{name}.seconds = {secs:.6}\n"));
            s.push_str(&format!("stage.{name}.files = {}\n", files.join(",")));
        }
        std::fs::write(dir.join("manifest.txt"), s)?;
        Ok(())
    }
}
