use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("line {line}: price {price} is not on the half-tick lattice of tick size {tick_size}")]
    OffGridPrice {
        line: u64,
        price: f64,
        tick_size: f64,
    },
    #[error("line {line}: time {time_s} is earlier than the previous row")]
    NonMonotoneTime { line: u64, time_s: f64 },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("missing config key `{0}`")]
    MissingKey(&'static str),
    #[error(transparent)]
    Core(#[from] touchdrift_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}
