//! The `outsample` command line: CSV data in, JSON models and key=value reports out.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

pub use commands::{run, Cli};
pub use error::CliError;
