//! Command implementations behind the `staticprobe` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Payload, Report};
pub use config::{CommandOptions, LambdaGrid, RunConfig};
pub use output::{read_report, write_report};
