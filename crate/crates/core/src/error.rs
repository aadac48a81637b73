use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The requested point lies outside the support of the block density,
    /// i.e. the operator norm of `A Aᵀ` (unscaled) reached 1.
    #[error("outside support: operator norm {op_norm} >= {limit}")]
    OutOfSupport { op_norm: f64, limit: f64 },

    #[error("symmetric eigensolver did not converge ({rows}x{rows} matrix, max |entry| = {max_abs})")]
    Eigensolver { rows: usize, max_abs: f64 },

    #[error("quadrature failed to converge on [{lo}, {hi}] after {intervals} subintervals (error estimate {estimate:e})")]
    Quadrature {
        lo: f64,
        hi: f64,
        intervals: usize,
        estimate: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
