use thiserror::Error;

/// Everything that can go wrong while building, decomposing or extending a kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index {index} out of range for a set of {len} points")]
    Index { index: usize, len: usize },
    #[error("training set would be empty")]
    EmptyTraining,
    #[error("invalid measure: weight {value} at index {index} is not strictly positive")]
    InvalidWeight { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    Config(String),
    #[error("kernel is not symmetric: defect {defect:e} exceeds {tol:e}")]
    NotSymmetric { defect: f64, tol: f64 },
    #[error("kernel is not positive semi-definite: min eigenvalue {min_eigenvalue:e} below {tol:e}")]
    NotPsd { min_eigenvalue: f64, tol: f64 },
    #[error("kernel has no eigenvalue above the rank tolerance")]
    ZeroKernel,
    #[error("function is not in the RKHS: projection residual {residual:e}")]
    NotInRkhs { residual: f64 },
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("isolated point at index {index}: its density vanishes after thresholding")]
    IsolatedPoint { index: usize },
    #[error("degenerate spectrum: eigenvalues {i} and {j} are closer than the gap tolerance")]
    DegenerateSpectrum { i: usize, j: usize },
    #[error("model format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
