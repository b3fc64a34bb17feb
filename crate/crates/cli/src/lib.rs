//! Command-line front end: CSV ingestion, run configuration, manifests, and
//! the `fit`, `correct`, `evaluate`, `bench`, `replay` and `fixture` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod output;

pub use commands::{execute, replay, RunSpec};
pub use error::CliError;
