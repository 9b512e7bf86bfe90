//! Result records and CSV plot data.
//!
//! A run writes `<stem>.json` and one `<stem>.<table>.csv` per table into the
//! output directory; a failed run writes `<stem>.error.json` instead. The
//! record's `wall_time_s` is the only field that changes between identical
//! runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Kind};
use crate::experiments::Report;
use crate::{RunError, LIBRARY_VERSION};

/// A tidy table: one row per plotted point.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<const N: usize>(&mut self, row: [String; N]) {
        debug_assert_eq!(N, self.header.len());
        self.rows.push(row.to_vec());
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let io = |e: csv::Error| RunError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize)]
pub struct Record<'a> {
    pub kind: Kind,
    pub library_version: &'static str,
    pub config: &'a ExperimentConfig,
    pub results: &'a Report,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    class: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: Kind,
    library_version: &'static str,
    exit_code: i32,
    error: ErrorBody<'a>,
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| RunError::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}

/// Writes the JSON record and the tables; returns the record path.
pub fn write_outcome(
    dir: &Path,
    stem: &str,
    cfg: &ExperimentConfig,
    outcome: &crate::Outcome,
    wall_time_s: f64,
) -> Result<PathBuf, RunError> {
    create_dir(dir)?;
    let record = Record {
        kind: cfg.kind,
        library_version: LIBRARY_VERSION,
        config: cfg,
        results: &outcome.report,
        wall_time_s,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &record)?;
    for table in &outcome.tables {
        table.write(&dir.join(format!("{stem}.{}.csv", table.name)))?;
    }
    Ok(path)
}

pub fn write_error(dir: &Path, stem: &str, kind: Kind, err: &RunError) -> Result<PathBuf, RunError> {
    create_dir(dir)?;
    let record = ErrorRecord {
        kind,
        library_version: LIBRARY_VERSION,
        exit_code: err.exit_code(),
        error: ErrorBody {
            class: err.class(),
            message: err.to_string(),
        },
    };
    let path = dir.join(format!("{stem}.error.json"));
    write_json(&path, &record)?;
    Ok(path)
}
