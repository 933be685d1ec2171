//! Command-line front end for the mixsig library: configuration, dataset I/O,
//! result tables and run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod table;

pub use commands::{run, Command, Invocation};
pub use error::CliError;
