//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by ingestion, partitioning, rate computation, fairness
/// evaluation, synthesis, and impossibility checking.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// The score file or schema violates the declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A single row of a score file is invalid. `line` is the 1-based line
    /// number in the file (header is line 1).
    #[error("row error at line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    /// A rate curve cannot be built because one label is absent.
    #[error("curve error: no {0} records in dataset")]
    MissingLabel(crate::score::Label),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// A fairness criterion is undefined on every cell of the partition.
    #[error("criterion error: {0}")]
    Criterion(String),

    #[error("partition error: {0}")]
    Partition(String),

    /// A synthetic population spec is invalid.
    #[error("population spec error: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
