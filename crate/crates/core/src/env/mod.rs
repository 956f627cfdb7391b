//! Environments and the subtask decompositions built on them.

pub mod gridnav;
pub mod minibuild;
pub mod subtask;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{ActionId, Environment, MdpSpec, StateVec, StepResult};
use crate::rng::SeededRng;

pub use gridnav::{Cell, GridNavConfig, GridNavEnv, GridReward};
pub use minibuild::{BuildAction, MiniBuildConfig, MiniBuildEnv, MiniBuildState, RewardMode};
pub use subtask::{
    chain_initial_condition, decomposition, subtask_factory, waypoint_subtasks, SubtaskSpec, Task,
};

/// Serializable description of any environment in this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    MiniBuild(MiniBuildConfig),
    GridNav(GridNavConfig),
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvConfig::MiniBuild(c) => c.validate(),
            EnvConfig::GridNav(c) => c.validate(),
        }
    }

    pub fn spec(&self) -> MdpSpec {
        match self {
            EnvConfig::MiniBuild(c) => c.spec(),
            EnvConfig::GridNav(c) => c.spec(),
        }
    }

    /// Dimension of the goal vector the environment tags steps with (0 if none).
    pub fn goal_dim(&self) -> usize {
        match self {
            EnvConfig::MiniBuild(_) => 0,
            EnvConfig::GridNav(_) => gridnav::STATE_DIM,
        }
    }

    pub fn build(&self) -> Result<AnyEnv> {
        Ok(match self {
            EnvConfig::MiniBuild(c) => AnyEnv::MiniBuild(MiniBuildEnv::new(c.clone())?),
            EnvConfig::GridNav(c) => AnyEnv::GridNav(GridNavEnv::new(c.clone())?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum AnyEnv {
    MiniBuild(MiniBuildEnv),
    GridNav(GridNavEnv),
}

impl Environment for AnyEnv {
    fn spec(&self) -> MdpSpec {
        match self {
            AnyEnv::MiniBuild(e) => e.spec(),
            AnyEnv::GridNav(e) => e.spec(),
        }
    }

    fn reset(&mut self, rng: &mut SeededRng) -> Result<StateVec> {
        match self {
            AnyEnv::MiniBuild(e) => e.reset(rng),
            AnyEnv::GridNav(e) => e.reset(rng),
        }
    }

    fn step(&mut self, action: ActionId) -> Result<StepResult> {
        match self {
            AnyEnv::MiniBuild(e) => e.step(action),
            AnyEnv::GridNav(e) => e.step(action),
        }
    }

    fn goal(&self) -> Option<StateVec> {
        match self {
            AnyEnv::MiniBuild(e) => e.goal(),
            AnyEnv::GridNav(e) => e.goal(),
        }
    }

    fn set_goal(&mut self, goal: &StateVec) -> Result<()> {
        match self {
            AnyEnv::MiniBuild(e) => e.set_goal(goal),
            AnyEnv::GridNav(e) => e.set_goal(goal),
        }
    }
}
