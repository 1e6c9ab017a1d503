use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WbError {
    #[error(transparent)]
    Core(#[from] qcl_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("machine file: {0}")]
    Machine(String),
    #[error("asset {0} is missing")]
    AssetMissing(String),
    #[error("grid extents {0}x{1} must both be even")]
    OddExtent(usize, usize),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl WbError {
    /// Process exit code: 1 for usage problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            WbError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WbError::Io { path: path.into(), source }
    }
}

pub type WbResult<T> = std::result::Result<T, WbError>;
