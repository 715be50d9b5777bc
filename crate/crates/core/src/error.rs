use nalgebra::DVector;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shift {mu} does not make the matrix positive definite (lambda_min = {lambda_min})")]
    ShiftNotPositive { mu: f64, lambda_min: f64 },

    /// The subproblem root search ran out of iterations. `best` is the step
    /// with the smallest observed ratio `|grad m(s)| / |s|`.
    #[error("subproblem solver stalled after {iterations} iterations (best ratio {best_ratio:e})")]
    SolverStalled {
        iterations: usize,
        best: DVector<f64>,
        best_ratio: f64,
    },

    #[error("step is numerically zero")]
    ZeroStep,

    #[error("invalid schedule: {0}")]
    ScheduleInvalid(String),

    #[error("averaged iterate requires at least one inner step")]
    NotReady,

    #[error("line search failed after {trials} trials")]
    LineSearchFailed { trials: usize },

    #[error("non-finite value encountered after {grad_evals} gradient evaluations")]
    DivergedNumerics { grad_evals: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
