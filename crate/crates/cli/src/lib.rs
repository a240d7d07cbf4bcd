//! Harness behind the `hvo` binary: experiment configuration, file formats
//! and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
