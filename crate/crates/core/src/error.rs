use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("not PSD: most negative eigenvalue {0:e}")]
    NotPsd(f64),

    #[error("singular covariance")]
    SingularCovariance,

    #[error("singular covariance; consider augment_dataset")]
    SingularDesign,

    #[error("prefix covariance singular")]
    SingularPrefix,

    #[error("invalid scaling matrix")]
    InvalidScaling,

    #[error("direction must be unit norm")]
    NonUnitDirection,

    #[error("post-debias requires multi-armed bandit structure")]
    NotBandit,

    #[error("bandit schedule requires diagonal S")]
    NonDiagonalPrefix,

    #[error("sample too small for default schedule (n = {0}, need n >= 16)")]
    SampleTooSmall(usize),

    #[error("exploration matrix not positive definite")]
    ExplorationNotPd,

    #[error("need at least one pull per arm")]
    TooFewPulls,

    #[error("empty context set")]
    EmptyContexts,

    #[error("n = {n} is not divisible by d - 1 = {d_minus_one}")]
    NotDivisible { n: usize, d_minus_one: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is not implemented")]
    NotImplemented(&'static str),

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
