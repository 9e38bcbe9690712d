use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Engine(#[from] learned_lsm::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed report row: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl BenchError {
    /// True for errors caused by the requested configuration rather than
    /// by running it.
    pub fn is_config(&self) -> bool {
        matches!(self, BenchError::Config(_) | BenchError::Engine(learned_lsm::Error::InvalidConfig(_)))
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
