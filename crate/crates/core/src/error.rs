use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building geometries, synthesizing channels, or
/// running experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid channel parameters: {0}")]
    Channel(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("search space too large: {combinations} combinations exceed cap {cap}")]
    SearchSpace { combinations: u128, cap: u128 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {message}")]
    Serialization { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
