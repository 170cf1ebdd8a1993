//! Command-line layer of `tracerec`: flags, config files, commands and
//! JSON reports.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::CliError;
