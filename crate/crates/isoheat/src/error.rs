use thiserror::Error;

/// Failure modes shared by every module.
///
/// `Config`/`Parameter`/`Unsupported` are validation errors (bad input);
/// `Numerical`, `NotFree`, `Divergence` and `Refused` are numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("map is not free at x = {point:?} (condition number {condition:e}, Gram spectrum {spectrum:?})")]
    NotFree {
        point: Vec<f64>,
        condition: f64,
        spectrum: Vec<f64>,
    },
    #[error("iteration diverged after {steps} steps; update norms {trace:?}")]
    Divergence { steps: usize, trace: Vec<f64> },
    #[error("refused: smallness product {product:e} exceeds θ = {theta:e}")]
    Refused { product: f64, theta: f64 },
}

impl Error {
    /// Validation errors map to exit code 2, numerical failures to 3.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parameter(_) | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
