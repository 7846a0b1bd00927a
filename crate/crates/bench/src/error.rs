//! Error type shared by the experiment layer and the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl BenchError {
    /// CLI exit code: 2 for configuration/startup problems, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Io(_) => 2,
            BenchError::Numerical(_) => 3,
        }
    }
}

impl From<ctxopt_core::kernel::KernelError> for BenchError {
    fn from(e: ctxopt_core::kernel::KernelError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl From<ctxopt_core::subspace::SubspaceError> for BenchError {
    fn from(e: ctxopt_core::subspace::SubspaceError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl From<ctxopt_core::estimator::EstimatorError> for BenchError {
    fn from(e: ctxopt_core::estimator::EstimatorError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl From<ctxopt_core::dro::DroError> for BenchError {
    fn from(e: ctxopt_core::dro::DroError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl From<ctxopt_core::solvers::SolverError> for BenchError {
    fn from(e: ctxopt_core::solvers::SolverError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}
