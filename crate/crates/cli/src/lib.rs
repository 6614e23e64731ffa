//! Library side of the `lumiforge` binary: run configuration, subcommand
//! implementations, and the held-out evaluation set, exposed so integration
//! tests can drive the pipeline in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod evalset;

pub use config::RunConfig;
pub use error::CliError;
