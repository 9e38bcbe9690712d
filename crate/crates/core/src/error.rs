use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lookup on empty index")]
    EmptyIndex,

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("corrupt table: {0}")]
    CorruptTable(String),

    #[error("block span out of range: blocks [{first}, {first}+{count}) of {available}")]
    Range { first: u64, count: u64, available: u64 },

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("storage error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
