//! Greedy evaluation over a fixed number of independent episodes.

use serde::{Deserialize, Serialize};
use subgoal_core::env::EnvConfig;
use subgoal_core::learn::{Layout, LearnerParams};
use subgoal_core::mdp::rollout_episode;
use subgoal_core::SeededRng;

use crate::checkpoint::Checkpoint;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean: f64,
    pub max: f64,
    pub rewards: Vec<f64>,
    /// Episodes that ended in a terminal state (goal reached) rather than
    /// at the step limit.
    pub terminal_episodes: usize,
    pub checkpoint_hash: String,
}

impl EvalReport {
    pub fn terminal_fraction(&self) -> f64 {
        self.terminal_episodes as f64 / self.episodes as f64
    }

    pub fn check(&self) -> Result<()> {
        if self.episodes == 0 || self.rewards.len() != self.episodes {
            return Err(HarnessError::Mismatch("episode count disagrees with rewards".into()));
        }
        if self.mean > self.max {
            return Err(HarnessError::Mismatch("mean exceeds max".into()));
        }
        Ok(())
    }
}

/// Rolls out the greedy policy of `params` on `env` for `episodes` episodes.
pub fn evaluate_params(
    params: &LearnerParams,
    env: &EnvConfig,
    episodes: usize,
    checkpoint_hash: String,
    rng: &mut SeededRng,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(HarnessError::Config("evaluation needs at least one episode".into()));
    }
    let found = params.layout();
    let spec = env.spec();
    let expected = Layout {
        state_dim: spec.state_dim,
        goal_dim: env.goal_dim(),
        action_count: spec.action_count,
        ..found.clone()
    };
    params.check_layout(&expected)?;

    let mut environment = env.build()?;
    let mut rewards = Vec::with_capacity(episodes);
    let mut terminal_episodes = 0;
    for _ in 0..episodes {
        let mut failure = None;
        let t = rollout_episode(
            &mut environment,
            |s, g, _| match params.greedy_action(s, g) {
                Ok(a) => a,
                Err(e) => {
                    failure.get_or_insert(e);
                    subgoal_core::ActionId(0)
                }
            },
            rng,
            None,
        )?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        if t.reached_terminal() {
            terminal_episodes += 1;
        }
        rewards.push(t.total_reward());
    }
    let mean = rewards.iter().sum::<f64>() / episodes as f64;
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EvalReport {
        episodes,
        mean,
        max,
        rewards,
        terminal_episodes,
        checkpoint_hash,
    })
}

pub fn evaluate(checkpoint: &Checkpoint, hash: String, episodes: usize, rng: &mut SeededRng) -> Result<EvalReport> {
    checkpoint.check()?;
    evaluate_params(&checkpoint.params, &checkpoint.eval_env, episodes, hash, rng)
}
