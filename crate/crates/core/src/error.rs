use ndarray::Array2;
use thiserror::Error;

use crate::qops::C64;

#[derive(Debug, Error)]
pub enum QdError {
    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate factor label `{0}`")]
    DuplicateLabel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |M - M^dag| = {0:.3e})")]
    NotHermitian(f64),

    #[error("trace deviates from 1 by {0:.3e}")]
    BadTrace(f64),

    #[error("state has eigenvalue {0:.3e} below the positivity tolerance")]
    NotPositive(f64),

    #[error("Kraus set incomplete: max |sum K^dag K - I| = {0:.3e}")]
    KrausIncomplete(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The generator kernel has dimension > 1; candidates span the detected
    /// kernel directions (Hermitized, unnormalized).
    #[error("steady state is not unique (kernel dimension >= {dim})")]
    NonUniqueSteadyState {
        dim: usize,
        candidates: Vec<Array2<C64>>,
    },

    #[error("no convergence: {0}")]
    ConvergenceFailure(String),

    #[error("integration step size underflow at t = {0:.6e}")]
    StepSizeUnderflow(f64),

    #[error("quadrature did not reach tolerance (error estimate {0:.3e})")]
    QuadratureFailure(f64),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

pub type Result<T> = std::result::Result<T, QdError>;
