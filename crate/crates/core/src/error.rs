use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// A configuration or state template broke one of its invariants.
    Invalid(String),
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    InvalidAction {
        index: usize,
        action_count: usize,
    },
    EmptyBuffer,
    EmptyBatch,
    EmptyTrajectory,
    StageOutOfRange {
        task: &'static str,
        stage: usize,
        stages: usize,
    },
    StateSpaceOverflow {
        limit: usize,
    },
    NotConverged {
        iterations: usize,
        residual: f64,
    },
    /// NaN or infinity showed up during a parameter update.
    Numeric(String),
    NotGoalConditioned,
    LayoutMismatch {
        expected: String,
        found: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Invalid(msg) => write!(f, "invalid: {msg}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected dimension {expected}, found {found}"),
            Error::InvalidAction {
                index,
                action_count,
            } => write!(f, "action {index} out of range (action count {action_count})"),
            Error::EmptyBuffer => f.write_str("replay buffer is empty"),
            Error::EmptyBatch => f.write_str("batch is empty"),
            Error::EmptyTrajectory => f.write_str("trajectory is empty"),
            Error::StageOutOfRange {
                task,
                stage,
                stages,
            } => write!(f, "{task} has {stages} stages, stage {stage} requested"),
            Error::StateSpaceOverflow { limit } => {
                write!(f, "reachable state space exceeds {limit} states")
            }
            Error::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::NotGoalConditioned => f.write_str("environment is not goal-conditioned"),
            Error::LayoutMismatch { expected, found } => {
                write!(f, "parameter layout mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
