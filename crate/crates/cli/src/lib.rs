//! Command implementations behind the `pathovc` binary. Each command takes
//! a validated [`Run`] and returns what it wrote, so the binary only parses
//! flags and prints.

pub mod commands;
pub mod config;
mod error;

pub use commands::Run;
pub use config::RunConfig;
pub use error::{CliError, Result};
