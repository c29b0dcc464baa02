use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("loss sum overflowed at index {index}")]
    Overflow { index: usize },

    #[error("normalization violated: {0}")]
    Normalization(String),

    #[error("Gram matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularGram { condition: f64 },

    #[error("Gram matrix is not positive definite (smallest eigenvalue {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("solver failed after {iterations} iterations: {reason} (residual {residual:e})")]
    SolverFailure {
        reason: String,
        iterations: usize,
        residual: f64,
    },

    #[error("dual entry q[{index}] = {value} exceeds 1")]
    DomainViolation { index: usize, value: f64 },

    #[error("candidate not applicable: class {class}, example {index} has signed product {value:e}")]
    NotApplicable {
        class: usize,
        index: usize,
        value: f64,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("training overflowed at iteration {iteration}")]
    TrainingOverflow { iteration: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
