use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set: {0}")]
    EmptySet(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("zero-one loss has no gradient")]
    NonDifferentiableLoss,
    #[error("attack needs at least one model")]
    EmptyModelList,
    #[error("attack history has no valuations")]
    EmptyHistory,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("degenerate mean-direction estimate (norm {0:e})")]
    DegenerateEstimate(f64),
    #[error("zero input vector")]
    ZeroInput,
    #[error("zero parameter vector")]
    ZeroVector,
    #[error("bad IDX magic: expected {expected}, found {found}")]
    BadMagic { expected: u32, found: u32 },
    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the `tdgame` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation { .. } | Error::BadParams(_) => 2,
            Error::ProtocolViolation(_) => 3,
            Error::NonFinite(_) | Error::DegenerateEstimate(_) | Error::ZeroInput | Error::ZeroVector => 4,
            _ => 1,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, got })
    }
}
