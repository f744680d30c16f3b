use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or block has the wrong length for the configured geometry.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A file is not in a supported audio format.
    #[error("unsupported format: {0}")]
    Format(String),
    /// A numerical procedure failed (singular system, lost positive definiteness).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
