use thiserror::Error;

/// Errors raised by divergence evaluation, centroid solvers and decompositions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value {value} at coordinate {index} in {context}")]
    NonFinite { context: String, index: usize, value: f64 },

    #[error("point {point:?} lies outside the domain ({reason})")]
    Infeasible { point: Vec<f64>, reason: String },

    #[error("boundary evaluation in {context}: coordinate {index} = {value:e}")]
    Boundary { context: String, index: usize, value: f64 },

    #[error("convexity violation: divergence evaluated to {0:e}")]
    ConvexityViolation(f64),

    #[error("{method} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        method: String,
        iterations: usize,
        residual: f64,
    },

    #[error("mean {mean:?} is infeasible; use the equality-constrained solver")]
    InfeasibleMean { mean: Vec<f64> },

    #[error("search region is unbounded in coordinate {0}; supply a search box")]
    UnboundedDomain(usize),

    #[error("verdict withheld: {unreliable} of {total} Hessian samples are unreliable")]
    VerdictWithheld { unreliable: usize, total: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(context: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            context: context.to_string(),
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
