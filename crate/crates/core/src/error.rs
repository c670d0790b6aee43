use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bandwidth {value}: must lie in [2, {max}]")]
    InvalidBandwidth { value: u32, max: u32 },

    #[error("bandwidth mismatch: expected {expected}, got {got}")]
    BandwidthMismatch { expected: u32, got: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
