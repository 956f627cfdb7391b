use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::qvalue::{MlpQ, QFunction, TabularQ};
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{ActionId, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub state_dim: usize,
    pub goal_dim: usize,
}

/// All trainable weights of a learner, in a checkpointable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerParams {
    Tabular(TabularQ),
    Dqn(MlpQ),
    ActorCritic(ActorCritic),
}

/// Shape descriptor a checkpoint is validated against before loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: String,
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_count: usize,
    /// Hidden layer widths (empty for tables).
    pub hidden: Vec<usize>,
}

impl core::fmt::Display for Layout {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{}(state {}, goal {}, actions {}, hidden {:?})",
            self.kind, self.state_dim, self.goal_dim, self.action_count, self.hidden
        )
    }
}

fn hidden_of(net: &Mlp) -> Vec<usize> {
    let s = net.sizes();
    s[1..s.len() - 1].to_vec()
}

impl LearnerParams {
    pub fn layout(&self) -> Layout {
        match self {
            LearnerParams::Tabular(q) => Layout {
                kind: "tabular".to_string(),
                state_dim: q.state_dim,
                goal_dim: q.goal_dim,
                action_count: q.action_count(),
                hidden: Vec::new(),
            },
            LearnerParams::Dqn(q) => Layout {
                kind: "dqn".to_string(),
                state_dim: q.state_dim,
                goal_dim: q.goal_dim,
                action_count: q.action_count(),
                hidden: hidden_of(&q.net),
            },
            LearnerParams::ActorCritic(ac) => Layout {
                kind: "actor_critic".to_string(),
                state_dim: ac.state_dim,
                goal_dim: ac.goal_dim,
                action_count: ac.actor.output_dim(),
                hidden: hidden_of(&ac.actor),
            },
        }
    }

    /// Checks internal consistency (input widths, finiteness).
    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            LearnerParams::Tabular(q) => q.is_finite(),
            LearnerParams::Dqn(q) => {
                if q.net.input_dim() != q.state_dim + q.goal_dim {
                    return Err(Error::Invalid("Q-network input width disagrees with its layout".into()));
                }
                q.net.is_finite()
            }
            LearnerParams::ActorCritic(ac) => {
                let input = ac.state_dim + ac.goal_dim;
                if ac.actor.input_dim() != input || ac.critic.input_dim() != input || ac.critic.output_dim() != 1 {
                    return Err(Error::Invalid("actor-critic shapes disagree with the layout".into()));
                }
                ac.actor.is_finite() && ac.critic.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite("learner parameters"))
        }
    }

    /// Rejects parameters whose layout differs from `expected`.
    pub fn check_layout(&self, expected: &Layout) -> Result<()> {
        let found = self.layout();
        if &found != expected {
            return Err(Error::LayoutMismatch {
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    /// Greedy action: argmax of Q, or the policy's mode.
    pub fn greedy_action(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<ActionId> {
        let scores = match self {
            LearnerParams::Tabular(q) => q.q_values(state, goal)?,
            LearnerParams::Dqn(q) => q.q_values(state, goal)?,
            LearnerParams::ActorCritic(ac) => {
                let found = state.len() + goal.map_or(0, |g| g.len());
                if state.len() != ac.state_dim || found != ac.state_dim + ac.goal_dim {
                    return Err(Error::DimensionMismatch {
                        what: "actor input",
                        expected: ac.state_dim + ac.goal_dim,
                        found,
                    });
                }
                ac.actor.forward(&state.with_goal(goal))?
            }
        };
        Ok(ActionId(math::argmax(&scores)))
    }
}
