//! Output files and the JSON run report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::scenario::Table;
use crate::{CliError, FieldError};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ConfigError,
    ConvergenceFailure,
    ComputationError,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    /// True when the run stopped while this table was being filled.
    pub partial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub status: Status,
    pub kind: Option<String>,
    pub config_sha256: Option<String>,
    /// Canonical TOML form of the configuration.
    pub config: Option<String>,
    pub threads: usize,
    pub outputs: Vec<OutputFile>,
    pub error_estimates: BTreeMap<String, f64>,
    pub timings_s: BTreeMap<String, f64>,
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn new(threads: usize) -> Self {
        Self {
            version: cavint::VERSION.to_string(),
            status: Status::Ok,
            kind: None,
            config_sha256: None,
            config: None,
            threads,
            outputs: Vec::new(),
            error_estimates: BTreeMap::new(),
            timings_s: BTreeMap::new(),
            errors: Vec::new(),
        }
    }

    pub fn set_config(&mut self, kind: &str, canonical: String) {
        self.kind = Some(kind.to_string());
        self.config_sha256 = Some(sha256_hex(canonical.as_bytes()));
        self.config = Some(canonical);
    }

    pub fn add_field_errors(&mut self, errors: &[FieldError]) {
        self.errors.extend(errors.iter().map(|e| e.to_string()));
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        let path = dir.join(REPORT_FILE);
        fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn render_csv(table: &Table) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).map_err(|e| CliError::Output(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

/// Write a table into `dir` and return its manifest entry.
pub fn write_table(dir: &Path, table: &Table, partial: bool) -> Result<OutputFile, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let bytes = render_csv(table)?;
    let path = dir.join(&table.name);
    fs::write(&path, &bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(OutputFile { file: table.name.clone(), sha256: sha256_hex(&bytes), rows: table.rows.len(), partial })
}
