pub mod config;
pub mod engine;
pub mod error;
pub mod index;
pub mod metrics;
pub mod sstable;
pub mod workload;

pub use config::{EngineConfig, Entry, EntryKind, IndexKind, IndexParams, Key};
pub use engine::Db;
pub use error::{Error, Result};
