use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpcpError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpcpError {
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("noise radius must be nonnegative, got {0}")]
    NegativeDelta(f64),
    #[error("noise radius must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("sparsity weight must be positive, got {0}")]
    NonPositiveXi(f64),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("singular value decomposition did not converge")]
    ConvergenceFailure,
    #[error("penalty {rho} is below the gradient Lipschitz constant {min}")]
    InvalidRho { rho: f64, min: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("subgradient certificate violated: {0}")]
    CertificateViolation(String),
}
