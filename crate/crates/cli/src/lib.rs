//! Batch front end for `hyperstab-core`.
//!
//! A run is described by one JSON document (see `docs/run_config.schema.json`):
//! a command, its payload, and optional seed, output directory and format.
//! [`run`] writes `report.json`, `run_metadata.json` and, for the CSV format,
//! one table per tabular section.

use std::path::PathBuf;

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, Format, Payload, RunConfig};
pub use run::{compute, run, ReportFile, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hyperstab_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Exit code for operational errors; 0 and 2 come from [`RunOutcome`].
pub const EXIT_ERROR: i32 = 1;
