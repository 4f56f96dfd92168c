//! Unsupervised environment design for partially observable mazes: a PPO
//! student, a learned transition model, regret scoring and a prioritized
//! task buffer with co-learnability.

pub mod agent;
pub mod curriculum;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod eval;
pub mod level;
pub mod nn;
pub mod oracle;
pub mod scoring;
pub mod suite;
pub mod ued;
pub mod verify;

pub use agent::{ActionSelection, PolicyLayout, PolicyParams, PpoConfig, PpoStats, Trajectory};
pub use curriculum::{CurriculumConfig, CurriculumState, Mode, TaskId, TaskRecord};
pub use dynamics::{DynamicsConfig, DynamicsLayout, DynamicsParams};
pub use env::{Maze, Observation};
pub use error::{Error, Result};
pub use eval::{evaluate_policy, EvalReport, LevelEval};
pub use level::{BlockCount, GenerationConfig, Level, LevelMetrics};
pub use scoring::RegretScore;
pub use suite::{held_out_suite, SuiteSize};
pub use ued::{LogRow, Phase, StepKind, StepReport, Ued, UedConfig};
pub use verify::{run_verification, VerifyOptions, VerifyReport};
