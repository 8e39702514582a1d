//! CSV tables, output directory handling and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use heitler::model::{HomodyneConfig, SystemParams, TruncationConfig};
use serde::{Deserialize, Serialize};

pub const MANIFEST_NAME: &str = "manifest.json";

/// A CSV table with a fixed header; numbers print in shortest round-trip
/// exponent form.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:e}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub params: SystemParams,
    pub homodyne: HomodyneConfig,
    pub truncation: TruncationConfig,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: ResolvedConfig,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Output directory that remembers what was written into it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        fs::write(self.root.join(name), contents)?;
        log::info!("wrote {}", self.root.join(name).display());
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, command_line: Vec<String>, config: ResolvedConfig, seeds: Vec<u64>) -> std::io::Result<()> {
        let manifest = RunManifest {
            command_line,
            config,
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.written,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        fs::write(self.root.join(MANIFEST_NAME), text + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, 0.25]);
        t.push(vec![-3.0, 1e-300]);
        assert_eq!(t.to_csv(), "a,b\n1e0,2.5e-1\n-3e0,1e-300\n");
    }
}
