use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the scorecard toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("no header")]
    NoHeader,

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{column}` is {found}, expected {expected}")]
    KindMismatch {
        column: String,
        found: String,
        expected: String,
    },

    #[error("target error: {0}")]
    Target(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid breaks for `{variable}`: {reason}")]
    InvalidBreaks { variable: String, reason: String },

    #[error("unseen level `{level}` in variable `{variable}`")]
    UnseenLevel { variable: String, level: String },

    #[error("missing value in variable `{0}` and no missing bin is available")]
    UnbinnableMissing(String),

    #[error("unknown bin label `{label}` for variable `{variable}`")]
    UnknownBin { variable: String, label: String },

    #[error("negative or non-finite observation weight at row {0}")]
    InvalidWeight(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular design matrix; collinear columns: {}", .0.join(", "))]
    Singular(Vec<String>),

    #[error("band {band} has no accepted observations, its default rate is undefined")]
    EmptyBand { band: usize },

    #[error("missing stage `{stage}`: {reason}")]
    MissingStage { stage: String, reason: String },

    #[error("project is locked by another process ({})", .0.display())]
    Locked(PathBuf),
}

pub type Result<T> = std::result::Result<T, Error>;
