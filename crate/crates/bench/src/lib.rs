//! Benchmark harness for the learned-index LSM engine: sweep driver,
//! CSV reports, self-verification suites and the `lsm-bench` CLI.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod report;
pub mod verify;

pub use error::{BenchError, Result};
pub use experiment::{run_experiment, ExperimentConfig, LoadOrder, MetricsReport, SweepPoint};
pub use report::{emit_csv, parse_csv, CsvRow, COLUMNS, LOGICAL_COLUMNS};
