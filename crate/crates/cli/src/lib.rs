//! Batch front end for `fiscal-svar`: JSON run configs, per-country
//! pipelines and the report bundle (tables, CSVs, SVG plots).

pub mod config;
pub mod demo;
pub mod pipeline;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error for {country}: {message}")]
    Data { country: String, message: String },
    #[error("inference error for {country}: {message}")]
    Inference { country: String, message: String },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Inference { .. } => 4,
            CliError::Io(_) => 1,
        }
    }
}
