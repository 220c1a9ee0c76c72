//! Library side of the `curemc` command: ingestion, configuration, run
//! storage and the five pipelines.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod store;

pub use error::{CliError, Result};
