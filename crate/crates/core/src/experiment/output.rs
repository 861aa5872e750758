//! Result tables with embedded provenance, written as CSV plus a JSON sidecar.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::error::{Error, Result};

/// Eb/N0 definition used by every BER table.
pub const SNR_CONVENTION: &str = "Eb/N0 per information bit with CP energy counted: \
noise variance per complex sample = (N + N_cp) / (N * bits_per_symbol * Eb/N0), unit-energy data symbols";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_convention: Option<String>,
    pub metadata: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig, experiment: &str) -> Result<Self> {
        // The output location does not affect results.
        let mut hashed = cfg.clone();
        hashed.output_dir = PathBuf::new();
        let digest = Sha256::digest(hashed.to_toml()?.as_bytes());
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            config_sha256,
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            snr_convention: None,
            metadata: cfg.metadata.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        })
    }

    pub fn with_snr_convention(mut self) -> Self {
        self.snr_convention = Some(SNR_CONVENTION.to_string());
        self
    }

    fn header_lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("experiment: {}", self.experiment),
            format!("config_sha256: {}", self.config_sha256),
            format!("seed: {}", self.seed),
            format!("code_version: {}", self.code_version),
        ];
        if let Some(s) = &self.snr_convention {
            v.push(format!("snr_convention: {s}"));
        }
        for (k, val) in &self.metadata {
            v.push(format!("{k}: {val}"));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(f) => Some(*f),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            // Shortest round-trip representation; stable across runs.
            Cell::Float(x) => write!(f, "{x:?}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    table: &'a str,
    csv: String,
    columns: &'a [String],
    rows: usize,
    provenance: &'a Provenance,
}

impl ResultTable {
    pub fn new(name: impl Into<String>, columns: &[&str], provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match the header of {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("table {} has no column {name:?}", self.name)))
    }

    /// Rows whose text column `key` equals `value`.
    pub fn rows_where<'a>(&'a self, key: &str, value: &'a str) -> Result<impl Iterator<Item = &'a Vec<Cell>> + 'a> {
        let i = self.column_index(key)?;
        Ok(self.rows.iter().filter(move |r| r[i].as_str() == Some(value)))
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[i].as_f64()
                    .ok_or_else(|| Error::Config(format!("column {name:?} is not numeric")))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for line in self.provenance.header_lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let s = Sidecar {
            table: &self.name,
            csv: format!("{}.csv", self.name),
            columns: &self.columns,
            rows: self.rows.len(),
            provenance: &self.provenance,
        };
        serde_json::to_string_pretty(&s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`; returns both paths.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.name));
        let json = dir.join(format!("{}.json", self.name));
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(&csv, buf)?;
        std::fs::write(&json, self.sidecar_json()? + "\n")?;
        Ok((csv, json))
    }
}
