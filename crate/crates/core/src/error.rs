use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix is rank deficient: pivot {index} has magnitude {pivot:e} (tolerance {tol:e})")]
    RankDeficient { index: usize, pivot: f64, tol: f64 },

    #[error("power iteration did not converge: last Rayleigh quotients {previous:e}, {last:e}")]
    NoConvergence { previous: f64, last: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exhaustive scan over {count} supports exceeds the limit of {limit}; use monte_carlo mode")]
    TooManySupports { count: u128, limit: u128 },

    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("no valid temperature: {0}")]
    NoValidTau(String),

    #[error("non-finite value in layer {layer}, op {op} ({phase})")]
    NonFinite {
        layer: usize,
        op: &'static str,
        phase: &'static str,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
