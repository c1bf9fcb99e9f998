use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the training and prediction pipeline.
#[derive(Debug, Error)]
pub enum MrcError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("no samples")]
    NoSamples,

    #[error("label column `{0}` not found")]
    MissingColumn(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("restricted LP is unbounded: {0}")]
    Unbounded(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("full LP refused: {required} constraints exceed the cap of {cap}; use constraint generation instead")]
    CapExceeded { required: u128, cap: u128 },

    #[error("time limit of {0:.1} s exceeded")]
    TimeLimit(f64),

    #[error("unsupported model file version `{0}`")]
    Version(String),

    #[error("invalid model file: {0}")]
    Model(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, MrcError>;

impl MrcError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MrcError::Io {
            path: path.into(),
            source,
        }
    }
}
