//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Bad or missing configuration (maps to CLI exit code 2).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor/image shape does not satisfy an operation's contract.
    #[error("shape error: {0}")]
    Shape(String),

    /// A value is outside its legal domain (e.g. a light component not in (-1, 1)).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values encountered during training; carries the offending term.
    #[error("numerical failure in `{term}`: {detail}")]
    Numerics { term: String, detail: String },

    /// Dataset/manifest problems.
    #[error("data error: {0}")]
    Data(String),

    /// Checkpoint file is malformed or from an incompatible schema.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code for this error: 2 for configuration, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
