//! Command-line laboratory for two-weight bump conditions: instance files,
//! CSV/JSON reports and the `bumplab` subcommands.

pub mod cli;
pub mod commands;
pub mod error;
pub mod instance;
pub mod report;

pub use cli::run_command;
pub use error::CliError;
