use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a structural invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative method stopped before reaching its tolerance.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    /// Some eigenpairs missed the residual target; lists `(index, residual)`
    /// with 1-based indices.
    #[error("eigenpairs did not converge (target {target:.3e}): {}", fmt_pairs(.unconverged))]
    EigenNonConvergence { unconverged: Vec<(usize, f64)>, target: f64 },

    /// A theorem hypothesis does not hold for the supplied data.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

fn fmt_pairs(pairs: &[(usize, f64)]) -> String {
    pairs
        .iter()
        .map(|(i, r)| format!("#{i} residual {r:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}
