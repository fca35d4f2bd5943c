//! Library side of the `skewmda` command: CSV ingestion, run configuration,
//! the fit/impute/analyze pipeline and its output files.

pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod pipeline;
pub mod simulate;

pub use error::{CliError, Result};
