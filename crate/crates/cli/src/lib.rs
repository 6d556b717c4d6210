//! Event files, run configuration, reports and the `touchdrift` command line
//! on top of `touchdrift-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
