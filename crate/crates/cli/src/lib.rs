//! Command-line front end: derive parameters, run experiments and sweeps,
//! and check the schedule and oracle properties.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::main_with_args;
pub use config::ConfigFile;
pub use error::{CliError, CliResult};
