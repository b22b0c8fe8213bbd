//! File formats, commands and the inference service behind the `ots` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod service;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
