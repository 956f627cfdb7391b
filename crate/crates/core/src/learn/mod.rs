//! Learners: tabular Q-learning, DQN with optional hindsight relabeling, and
//! PPO-clip, all behind the [`Agent`] trait the curriculum executor drives.

pub mod agent;
pub mod dqn;
pub mod mlp;
pub mod optim;
pub mod params;
pub mod ppo;
pub mod qvalue;

pub use agent::{Agent, LearnStats, TabularAgent, TabularConfig};
pub use dqn::{DqnAgent, DqnConfig};
pub use mlp::Mlp;
pub use optim::{Optimizer, OptimizerKind};
pub use params::{ActorCritic, Layout, LearnerParams};
pub use ppo::{PpoAgent, PpoConfig};
pub use qvalue::{EpsilonSchedule, MlpQ, QFunction, TabularQ};
