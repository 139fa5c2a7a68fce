//! Command-line front end: `simulate`, `estimate` and `montecarlo`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use args::{Cli, Command};
pub use commands::run;
pub use config::EstimateConfig;
pub use error::{CliError, CliResult};
