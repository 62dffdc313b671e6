//! Experiment driver: builds a model from a TOML config, runs one of the
//! solvers and writes CSV/JSON outputs plus a run manifest.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

/// Version of the JSON summary and manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, flags or output directory.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A solver or I/O step failed.
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<pdmp_control::Error> for CliError {
    fn from(e: pdmp_control::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
