//! Command-line companion to `qlyap-core`: thread-pool executor, flat
//! configuration files, CSV and SVG output, and the `qlyap` subcommands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod exec;
pub mod observables;
pub mod svg;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use exec::Pool;
