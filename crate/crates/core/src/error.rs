use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("transcendental function `{name}` is not allowed under the EXACT backend")]
    Transcendental { name: String },

    #[error("pole: {0}")]
    Pole(String),

    #[error("backend mismatch: operands use different backends")]
    BackendMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("combination coefficients are all zero")]
    ZeroCombination,

    #[error("NON_DIAGONALIZABLE: {0}")]
    NonDiagonalizable(String),

    #[error("VERIFICATION_FAILED: off-diagonal residual {residual:e} exceeds {bound:e}")]
    VerificationFailed { residual: f64, bound: f64 },

    #[error("UNIVARIANCE_VIOLATION({row},{col})")]
    UnivarianceViolation { row: usize, col: usize },

    #[error("SINGULAR: {0}")]
    Singular(String),

    #[error("singular frame at point")]
    SingularFrame,

    #[error("inconsistent blocks: {0}")]
    InconsistentBlocks(String),

    #[error("metric component g^{{{0}{0}}} vanishes at the point")]
    VanishingMetricComponent(usize),

    #[error("NO_CONVERGENCE after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
