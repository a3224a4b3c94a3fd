//! Configuration, sweeps and reports for the `ngdrate` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod seeds;
pub mod sweep;

pub use config::{Diagnostic, ExperimentConfig};
pub use error::{CliError, CliResult};
