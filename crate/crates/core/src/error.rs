use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("singular point: {0}")]
    Singularity(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    #[error("function is not bounded: {0}")]
    Unbounded(String),

    #[error("truncation error too large: {0}")]
    Truncation(String),

    #[error("recovered density is not causal: {0}")]
    Causality(String),

    #[error("function not representable by any calculus route: {0}")]
    Recognition(String),

    #[error("grid resolution: {0}")]
    GridResolution(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
