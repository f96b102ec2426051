use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("unknown sector name `{0}`")]
    UnknownSector(String),

    #[error("duplicate cell for region `{region}`, indicator `{indicator}`")]
    DuplicateCell { region: String, indicator: String },

    #[error("non-numeric value `{value}` at line {line}")]
    NonNumeric { value: String, line: u64 },

    #[error("invalid region id at line {line}: {reason}")]
    InvalidRegion { line: u64, reason: String },

    #[error("indicator `{0}` has no observed value to impute from")]
    AllMissing(String),

    #[error("region `{region}` is missing day {day} of the observation window")]
    MissingDay { region: String, day: usize },

    #[error("region `{region}` reports more deaths than cases on day {day}")]
    DeathsExceedCases { region: String, day: usize },

    #[error("region `{region}` has a decreasing cumulative series at day {day}")]
    DecreasingSeries { region: String, day: usize },

    #[error("region `{0}` has no CFR series")]
    MissingCfr(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative compartment `{compartment}` at t = {time:.3}; retry with a smaller dt (current {dt})")]
    NegativeCompartment {
        compartment: &'static str,
        time: f64,
        dt: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
