use thiserror::Error;

/// Errors surfaced by the curriculum, environment and learner components.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid level: {0}")]
    InvalidLevel(String),

    #[error("step called on a finished episode")]
    EpisodeDone,

    #[error("invalid action {0}; expected 0..7")]
    InvalidAction(usize),

    #[error("shape mismatch: expected {expected} elements, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("empty buffer")]
    EmptyBuffer,

    #[error("negative input to {what}: {value}")]
    NegativeInput { what: &'static str, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("unknown task id {0}")]
    UnknownTask(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
