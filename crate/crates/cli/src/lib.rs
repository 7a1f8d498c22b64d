//! Command-line front end for `kronpcg`.

pub mod args;
pub mod commands;
pub mod error;
pub mod runlog;
pub mod tensor_file;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
