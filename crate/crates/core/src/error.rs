use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e}, tolerance {tolerance:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("step size too large: smallest eigenvalue {min_eigenvalue:.3e} at t = {time}")]
    StepSizeTooLarge { min_eigenvalue: f64, time: f64 },

    #[error("path diverged at t = {time}")]
    PathDiverged { time: f64 },

    #[error("fluctuation threshold exceeded: {0}")]
    ThresholdExceeded(String),

    #[error("eigenvalue collision could not be resolved at t = {time} after {halvings} halvings")]
    CollisionFailure { time: f64, halvings: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
