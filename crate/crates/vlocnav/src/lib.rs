//! Scenario files, persistence, sweeps and reports around `vlocnav-core`.

pub mod config;
pub mod formats;
pub mod report;
pub mod sweep;
mod svg;

use thiserror::Error;

pub use config::{AxisKind, ExperimentConfig};
pub use sweep::{run_sweep, Axis, SweepOptions, SweepResult};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Read(String, #[source] std::io::Error),
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected file format: {0}")]
    WrongFormat(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("invalid content: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("the result set has no odometry-only baseline")]
    MissingBaseline,
    #[error("the result set has no complete axis point")]
    NoPoints,
    #[error(transparent)]
    Format(#[from] FormatError),
}
