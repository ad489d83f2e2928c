use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit statuses of the command line.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const MISMATCH: i32 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] cvrnet_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },

    #[error("{0}")]
    Usage(String),

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error("verification failed: {0}")]
    Verify(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, detail: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), detail: detail.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(cvrnet_core::Error::NonFinite { .. } | cvrnet_core::Error::NonFiniteLoss { .. }) => exit::NUMERICAL,
            Error::Mismatch(_) => exit::MISMATCH,
            Error::Verify(_) => exit::VERIFY_FAILED,
            _ => exit::USAGE,
        }
    }
}
