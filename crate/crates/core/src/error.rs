use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("imaginary residue {residue:.3e} exceeds tolerance {tolerance:.1e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no observations")]
    NoObservations,

    #[error("data error: {0}")]
    Data(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("solver did not converge: {0}")]
    SolverNonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Process exit code used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::CgNotConverged { .. } | Error::SolverNonConvergence(_) => 4,
            _ => 3,
        }
    }
}
