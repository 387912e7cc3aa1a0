//! Command-line front end. Reads scenario files and writes deterministic
//! CSV and SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod scenario_file;

pub use commands::execute;
pub use config::RunConfig;
pub use error::CliError;
