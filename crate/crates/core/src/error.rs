//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Fewer than two nodes, or an operation that needs a non-degenerate
    /// network received one.
    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    /// Matrix dimensions do not conform.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// |beta1| >= 1: the simultaneous outcome system has no unique solution.
    #[error("endogenous effect beta1 = {0} is not a contraction (|beta1| must be < 1)")]
    NonContraction(f64),

    /// The joint fixed-effect logit MLE does not exist for the listed nodes
    /// (degree 0 or N-1 within the fitted subnetwork).
    #[error("link-model MLE does not exist: {count} node(s) at boundary degree, first few: {first:?}")]
    MleNonexistent { count: usize, first: Vec<usize> },

    /// A dyadic feature coordinate is constant across dyads, so the homophily
    /// coefficient is not separable from the fixed effects.
    #[error("collinear dyad features: coordinate {coord} is constant across dyads")]
    CollinearFeatures { coord: usize },

    /// Iteration cap reached before the score dropped below tolerance.
    #[error("MLE did not converge: {iterations} sweeps, max |score| = {max_grad:.3e}")]
    NonConvergence { iterations: usize, max_grad: f64 },

    /// A moment matrix required by the estimator is singular or the
    /// identification rank condition fails empirically.
    #[error("identification failure: {0}")]
    Identification(String),

    /// An estimator precondition is violated (missing fit, overlapping
    /// regressors, boundary nodes present, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Sieve truncation too large for the sample.
    #[error("overparameterized basis: K = {k} with only n = {n} observations")]
    Overparameterized { k: usize, n: usize },

    /// Invalid configuration value.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Too many Monte Carlo replications failed.
    #[error("{failed} of {total} replications failed (> {percent_cap}%); causes: {histogram}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        percent_cap: u32,
        histogram: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file {path}: {reason}")]
    Parse { path: String, reason: String },
}

impl Error {
    /// Stable machine-readable code, used as the CLI exit status.
    pub fn code(&self) -> i32 {
        match self {
            Error::DegenerateNetwork(_) => 10,
            Error::DimensionMismatch(_) => 11,
            Error::NonContraction(_) => 12,
            Error::MleNonexistent { .. } => 20,
            Error::CollinearFeatures { .. } => 21,
            Error::NonConvergence { .. } => 22,
            Error::Identification(_) => 30,
            Error::Precondition(_) => 31,
            Error::Overparameterized { .. } => 32,
            Error::InvalidConfig(_) => 40,
            Error::TooManyFailures { .. } => 41,
            Error::Io(_) => 50,
            Error::Parse { .. } => 51,
        }
    }
}
