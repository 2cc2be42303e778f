//! The `mcdropout` command-line tool.

pub mod commands;
pub mod config;

pub use commands::{run, Cli};
pub use config::{Precision, RunConfig};
