//! Command-line harness around `iou-core`: CSV ingestion, TOML
//! configuration, JSON artifacts, simulation studies, the oracle suite and
//! the timing probe.

pub mod cli;
pub mod config;
pub mod cost_probe;
pub mod csv_io;
pub mod error;
pub mod formats;
pub mod oracle;

pub use error::{CliError, CliResult};
