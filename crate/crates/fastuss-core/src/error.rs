//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad preset, divisibility violation, bad CLI flag value).
    #[error("config error: {0}")]
    Config(String),

    /// Tensor shape mismatch between an operation and its inputs.
    #[error("shape error: {0}")]
    Shape(String),

    /// A numerical contract was violated (non-finite value, fully-masked row, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Prompt vocabulary violation (unknown stem, illegal repeat, count out of range).
    #[error("prompt error: {0}")]
    Vocab(String),

    /// Calibration could not reach the required residual.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// Malformed file contents (WAV, weight container, config JSON).
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 usage/config, 3 i/o, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Vocab(_) | Error::Shape(_) => 2,
            Error::Io(_) | Error::Format(_) => 3,
            Error::Contract(_) | Error::Calibration(_) => 1,
        }
    }
}
