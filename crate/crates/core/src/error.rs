use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle detected in causal graph (involving node `{0}`)")]
    CycleDetected(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid structural equation for `{node}`: {reason}")]
    InvalidEquation { node: String, reason: String },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation of `{node}` failed: {reason}")]
    Evaluation { node: String, reason: String },

    #[error("node `{0}` cannot be intervened upon")]
    NotIntervenable(String),

    #[error("value {value} for `{node}` lies outside its domain [{lo}, {hi}]")]
    DomainViolation {
        node: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("scenario mutation infeasible: {0}")]
    MutationInfeasible(String),

    #[error("no valid intervention set: {0}")]
    NoValidSet(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not positive definite even after jitter {jitter:e}")]
    SingularMatrix { jitter: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("query cost must be positive, got {0}")]
    ZeroCost(f64),

    #[error("variable `{0}` has no interventional bounds")]
    EmptyDomain(String),

    #[error("degenerate domain: dimension {0} has zero width")]
    DegenerateDomain(usize),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("benchmark `{0}` has no structural equations and cannot be simulated")]
    NonRunnable(String),

    #[error("cannot plot an empty trace set")]
    EmptyTrace,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error("{failed} of {total} runs failed: {details}")]
    RunsFailed {
        failed: usize,
        total: usize,
        details: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
