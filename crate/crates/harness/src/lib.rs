//! Experiment harness around `subgoal-core`: JSON configs, training and
//! evaluation runs, checkpoints, run comparison and the Q* oracle export.

pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod oracle_csv;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, LearnerKind, Mode, TaskKind};
pub use error::{HarnessError, Result};
