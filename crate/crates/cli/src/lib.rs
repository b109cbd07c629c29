//! Command line front end and HTTP service for the `ibtm` toolkit.

pub mod api;
pub mod commands;
pub mod config;
pub mod service;

pub use commands::{CliError, CliResult, PredictorKind};
pub use config::RunConfig;
