//! Batch runs over the `gridtwin` library. Every command writes its
//! results plus a `manifest.json` into an output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
