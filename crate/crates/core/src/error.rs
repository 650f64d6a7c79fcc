//! Error types shared across the library.

use thiserror::Error;

/// Position-annotated syntax error from the expression parser.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{message} (byte offset {offset})")]
pub struct ParseError {
    /// Byte offset into the source text where the problem was detected.
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

/// Runtime evaluation failure of a scalar field.
///
/// Domain errors are hard failures rather than NaN propagation; `at`
/// identifies the offending sub-expression (or native rule).
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{kind} in `{at}`")]
pub struct EvalError {
    pub kind: DomainErrorKind,
    pub at: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DomainErrorKind {
    #[error("log of non-positive argument")]
    LogNonPositive,
    #[error("square root of negative argument")]
    SqrtNegative,
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-integer power of non-positive base")]
    PowNonPositiveBase,
    #[error("tangent at a pole")]
    TanPole,
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("state is on the {got} side, operation needs the {expected} side")]
    WrongSide {
        expected: &'static str,
        got: &'static str,
    },

    #[error("Lagrangian is singular at the evaluated state (det W = {det:.3e})")]
    SingularHessian { det: f64 },

    #[error(
        "structure-equation residual {value:.3e} at the {which} indices {indices:?} exceeds the \
         construction tolerance {tolerance:.1e}"
    )]
    StructureValidation {
        which: &'static str,
        indices: Vec<usize>,
        value: f64,
        tolerance: f64,
    },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
