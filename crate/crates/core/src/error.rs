use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integration diverged at shooting node {node}")]
    IntegrationDiverged { node: usize },

    #[error("invalid block structure: {0}")]
    InvalidBlockStructure(String),

    #[error("interval index {index} out of range for horizon of {horizon} intervals")]
    IndexOutOfRange { index: usize, horizon: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Re-tags an integration failure with the shooting node it occurred at.
    pub fn at_node(self, node: usize) -> Self {
        match self {
            Error::IntegrationDiverged { .. } => Error::IntegrationDiverged { node },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
