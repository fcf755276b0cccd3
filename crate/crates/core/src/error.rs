use thiserror::Error;

/// Errors raised by the geometric primitives, the control law and the integrators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {coords:?} lies outside the chart domain")]
    Domain { coords: Vec<f64> },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("geodesic left the chart domain; last valid point {last_valid:?}")]
    ChartExit { last_valid: Vec<f64> },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("exact integer arithmetic overflowed: {0}")]
    Overflow(String),

    #[error("cost oracle returned {value}, expected a nonnegative value")]
    OracleContract { value: f64 },

    #[error("integration diverged at t = {t}: invariant defect {defect:e}")]
    Diverged { t: f64, defect: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
