use thiserror::Error;

/// Errors produced by the forward, sensitivity and inversion routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GptError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conductivity not admissible: {0}")]
    InadmissibleConductivity(String),

    #[error("mode equation for n = {mode} did not converge (residual {residual:e})")]
    ModeSolve { mode: usize, residual: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("operator is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("Landweber iteration diverged at step {iteration} (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },

    #[error("Landweber iteration stopped after {iterations} steps with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("inadmissible target data: {0}")]
    InadmissibleTarget(String),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, GptError>;
