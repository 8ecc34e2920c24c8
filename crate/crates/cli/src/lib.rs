//! Command-line driver: configuration, CSV ingestion, and the enumerate / search /
//! fit / emit / simulate subcommands.

pub mod config;
pub mod error;
pub mod ingest;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
