use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("entry count {got} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },

    #[error("matrix is not Hermitian: max |M - M^H| = {deviation:e} exceeds tolerance {tol:e}")]
    HermiticityViolation { deviation: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("rank {rank}: found {found} independent multipoles, expected {expected}")]
    RankDeficient { rank: usize, found: usize, expected: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("value {value} lies outside the Gershgorin interval [{lower}, {upper}]")]
    OutsideNumericalRange { value: f64, lower: f64, upper: f64 },

    #[error("no null space for value {value} at tolerance {tol:e}")]
    EmptyNullSpace { value: f64, tol: f64 },

    #[error("coherent-state frame is singular (Gram condition number {condition:e})")]
    SingularFrame { condition: f64 },

    #[error("field profile is not tuned: worst coefficient {index} deviates by {deviation:e}")]
    NotTuned { index: usize, deviation: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Errors caused by bad input or configuration, as opposed to a
    /// numerical failure inside the simulator.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NotSquare { .. }
                | Error::NonFinite { .. }
                | Error::ShapeMismatch { .. }
                | Error::HermiticityViolation { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidState(_)
                | Error::OutsideNumericalRange { .. }
                | Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::Io { .. }
        )
    }
}
