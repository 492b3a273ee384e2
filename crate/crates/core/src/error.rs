use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature window misses kernel mass {missing:.3e} at x = {x} (tolerance {tol:.1e})")]
    Coverage { x: f64, missing: f64, tol: f64 },

    #[error("degenerate filter at step {step}: {detail}")]
    DegenerateFilter { step: usize, detail: String },

    #[error("set is not local-Doeblin: {0}")]
    NotCertifiable(String),

    #[error("no interval up to radius {max_radius} satisfies the drift/likelihood condition at eta = {eta}")]
    H2Unverified { eta: f64, max_radius: f64 },

    #[error("drift precondition fails at x = {x}: log(QV/V) = {lhs} > {rhs}")]
    Precondition { x: f64, lhs: f64, rhs: f64 },

    #[error("problem too large for exact computation: {0}")]
    TooLarge(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_replication(self, rep: usize) -> Self {
        Error::Replication {
            rep,
            source: Box::new(self),
        }
    }

    /// Usage and configuration problems, as opposed to numerical or domain failures.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Replication { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
