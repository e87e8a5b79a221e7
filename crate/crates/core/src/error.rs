use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension overflow: {what} needs {requested} sites, limit is {limit}")]
    DimensionOverflow {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid site list: {0}")]
    InvalidSites(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("dense eigendecomposition failed")]
    Eigen,

    #[error("transform of block with {block_len} sites is not an isometry (deviation {deviation:.3e})")]
    NotIsometry { block_len: usize, deviation: f64 },

    #[error("density operator trace is {trace}, expected 1")]
    Trace { trace: f64 },

    #[error("density operator has eigenvalue {value:.3e} below the admissible floor")]
    NegativeEigenvalue { value: f64 },

    #[error("fit design matrix is rank deficient (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("fit needs {needed} records inside the window, found {found}")]
    TooFewRecords { needed: usize, found: usize },

    #[error("nonpositive value {value} at mu = {mu} inside the fit window")]
    NonPositive { mu: f64, value: f64 },

    #[error("record sets have no overlapping mu range")]
    NoOverlap,

    #[error("mu = {mu} is not realizable on a chain of {n_sites} sites")]
    Unrealizable { mu: String, n_sites: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
