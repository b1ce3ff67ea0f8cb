use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter bundle failed its construction-time validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A swap-type operator was asked for with the wrong parameter ordering.
    #[error("parameter order error: {0}")]
    ParameterOrder(String),

    /// A contour plan cannot satisfy its nesting constraints.
    #[error("infeasible contour plan: {0}")]
    InfeasibleContour(String),

    /// The thinning majorant was violated repeatedly; signals a rate bug.
    #[error("majorant violation after {shrinks} window shrinks: {detail}")]
    MajorantViolation { shrinks: u32, detail: String },

    /// A state-space or time guard was exceeded.
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    /// An iterative computation did not converge.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// Malformed textual input (configuration encodings, CLI values).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
