//! Stage runner for the recall root-cause pipeline: fetch, build, cluster,
//! aggregate and report, each reading and writing artifacts in one output
//! directory.

pub mod args;
pub mod config;
pub mod error;
pub mod stages;

pub use error::CliError;
