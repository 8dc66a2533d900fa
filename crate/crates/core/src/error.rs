use alloc::string::String;

use crate::model::TransformedParams;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("scale parameter must be strictly positive, got {0}")]
    NonPositiveScale(f64),

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),

    #[error("log-response family requires strictly positive responses, found {0}")]
    NonPositiveResponse(f64),

    #[error("response range is degenerate (y_lo == y_hi == {0})")]
    DegenerateResponseRange(f64),

    #[error("privacy budget must be positive and finite, got {0}")]
    InvalidBudget(f64),

    #[error("feature dimension must be at least 1, got {0}")]
    InvalidDimension(usize),

    #[error("need more than d + 2 samples for maximum likelihood (n = {n}, d = {d})")]
    TooFewSamples { n: usize, d: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (|grad|_inf = {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last: TransformedParams,
    },

    #[error("degenerate fit: scale iterate q = {q:e} collapsed")]
    DegenerateFit { q: f64 },

    #[error("repaired Hessian is singular")]
    SingularHessian,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
