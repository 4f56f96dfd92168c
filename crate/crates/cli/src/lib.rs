//! Experiment harness around `traced-core`: configuration, seeded runs,
//! held-out evaluation, reports and the oracle check suite.

pub mod config;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use report::{emit_report, ReportOutcome};
pub use run::{evaluate_checkpoint, run_experiment, run_experiment_with, Checkpoint, RunSummary};
