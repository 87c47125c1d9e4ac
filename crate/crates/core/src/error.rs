//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (registry, arch, training, loss, or phantom).
    #[error("configuration error: {0}")]
    Config(String),

    /// A kernel domain id that is not present in the registry.
    #[error("unknown kernel domain `{0}`")]
    UnknownDomain(String),

    /// Volume ingestion failure, with the offending path.
    #[error("failed to ingest `{path}`: {message}")]
    Ingest { path: PathBuf, message: String },

    /// Tensor or volume shape violates an operation's contract.
    #[error("shape error: {0}")]
    Shape(String),

    /// Checkpoint serialization, deserialization, or version mismatch.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A loss or parameter became NaN/Inf during training.
    #[error("non-finite {quantity} on path {path}")]
    NonFinite { quantity: String, path: String },

    /// Emphysema scoring failure (empty mask, shape mismatch).
    #[error("scoring error: {0}")]
    Scoring(String),

    /// Design matrix is rank deficient; names the offending covariate.
    #[error("collinear design: covariate `{0}` carries no independent variation")]
    Collinear(String),

    /// Other statistics failures (degenerate degrees of freedom, too few rows).
    #[error("statistics error: {0}")]
    Stats(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn ingest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingest {
            path: path.into(),
            message: message.into(),
        }
    }
}
