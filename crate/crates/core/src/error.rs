//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants carry a
//! stable machine-readable code (see [`Error::code`]) so that callers such as
//! the CLI can emit structured error records without matching on strings.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An array or coefficient vector had the wrong shape.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Two objects were built over different intervals.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// Two objects were built over different time grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The time step T/N exceeds 1.
    #[error("mesh too large: {0}")]
    MeshTooLarge(String),

    /// The stability product lambda_n^2 * (T/N) exceeds 1 and the override
    /// flag was not set.
    #[error("stability bound violated: {0}")]
    CflViolated(String),

    /// The regression design collapsed and could not be repaired by degree
    /// truncation.
    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    /// The implicit solve at one time step did not reach the update
    /// tolerance within the iteration budget.
    #[error("fixed-point iteration failed at step {step}: last update norm {residual:e}")]
    IterationFailure { step: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    MalformedFile(String),
}

impl Error {
    /// Stable identifier for machine consumption (CLI error records, tests).
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::DomainMismatch(_) => "domain_mismatch",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::MeshTooLarge(_) => "mesh_too_large",
            Error::CflViolated(_) => "cfl_violated",
            Error::DegenerateRegression(_) => "degenerate_regression",
            Error::IterationFailure { .. } => "iteration_failure",
            Error::Io(_) => "io_error",
            Error::MalformedFile(_) => "malformed_file",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
