use thiserror::Error;

/// Errors shared across the solver stack.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (only 1 and 2 are implemented)")]
    UnsupportedDimension(usize),

    #[error("grid too coarse: M = {0}, need M >= 2")]
    TooCoarse(usize),

    #[error("field kind {found:?} does not match expected {expected:?}")]
    KindMismatch {
        expected: crate::space::ProblemKind,
        found: crate::space::ProblemKind,
    },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("field has zero Y-norm: {0}")]
    ZeroField(&'static str),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("unsupported kind for this operation: {0}")]
    UnsupportedKind(&'static str),

    #[error("linear system is singular (pivot {pivot:.3e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("inner solve failed at outer step {step}: residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.3e})")]
    InnerSolveFailed {
        step: usize,
        residual: f64,
        iterations: usize,
        tolerance: f64,
    },

    #[error("iterate left machine range at step {step}: ||u||_Y = {ynorm:.3e}")]
    Degenerate { step: usize, ynorm: f64 },

    #[error("invariant violated at step {step} in strict mode: {which} off by {magnitude:.3e}")]
    InvariantViolation {
        step: usize,
        which: &'static str,
        magnitude: f64,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
