//! Deep Q-learning with a replay buffer, a periodically synced target
//! network and optional hindsight relabeling of finished episodes.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, LearnStats};
use super::optim::{Optimizer, OptimizerKind};
use super::params::LearnerParams;
use super::qvalue::{epsilon_greedy, td_loss, EpsilonSchedule, MlpQ, QFunction};
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{ActionId, Experience, StateVec, Trajectory};
use crate::replay::{relabel_hindsight, GoalPredicate, RelabelStrategy, ReplayBuffer};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    /// Updates between copies of the online network into the target network.
    pub target_sync_interval: u64,
    pub epsilon: EpsilonSchedule,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    /// Environment steps per gradient update.
    pub train_every: usize,
    /// Buffer size required before the first update.
    pub learning_starts: usize,
    pub relabel: RelabelStrategy,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            learning_rate: 0.0007,
            batch_size: 32,
            gamma: 0.99,
            target_sync_interval: 500,
            epsilon: EpsilonSchedule::default(),
            buffer_capacity: 100_000,
            hidden: alloc::vec![64, 64],
            optimizer: OptimizerKind::Sgd,
            train_every: 1,
            learning_starts: 32,
            relabel: RelabelStrategy::None,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Invalid("gamma must lie in [0, 1]".into()));
        }
        if self.target_sync_interval == 0 || self.buffer_capacity == 0 || self.train_every == 0 {
            return Err(Error::Invalid(
                "target_sync_interval, buffer_capacity and train_every must be positive".into(),
            ));
        }
        self.epsilon.validate()
    }
}

/// One gradient step on the TD loss of a uniformly sampled batch. The target
/// network is re-synced every `target_sync_interval` calls, counted by
/// `updates`.
#[allow(clippy::too_many_arguments)]
pub fn dqn_update(
    buffer: &ReplayBuffer,
    online: &mut MlpQ,
    target: &mut MlpQ,
    optimizer: &mut Optimizer,
    batch_size: usize,
    gamma: f64,
    target_sync_interval: u64,
    updates: &mut u64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let batch = buffer.sample_uniform(batch_size, rng)?;
    let (loss, grads) = td_loss(&batch, online, target, gamma)?;
    if !loss.is_finite() {
        return Err(Error::Numeric("TD loss is not finite".into()));
    }
    optimizer.step(online.net.params_mut(), &grads)?;
    *updates += 1;
    if *updates % target_sync_interval == 0 {
        target.clone_from(online);
    }
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    online: MlpQ,
    target: MlpQ,
    optimizer: Optimizer,
    buffer: ReplayBuffer,
    config: DqnConfig,
    predicate: GoalPredicate,
    acted: u64,
    pending: usize,
    updates: u64,
    episode: Vec<Experience>,
}

impl DqnAgent {
    pub fn new(
        state_dim: usize,
        goal_dim: usize,
        action_count: usize,
        config: DqnConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let online = MlpQ::new(state_dim, goal_dim, &config.hidden, action_count, rng)?;
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate, online.net.param_count());
        Ok(DqnAgent {
            target: online.clone(),
            online,
            optimizer,
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            config,
            predicate: GoalPredicate::default(),
            acted: 0,
            pending: 0,
            updates: 0,
            episode: Vec::new(),
        })
    }

    pub fn online(&self) -> &MlpQ {
        &self.online
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.acted)
    }

    fn finish_episode(&mut self) -> Result<()> {
        if self.config.relabel != RelabelStrategy::None && !self.episode.is_empty() {
            let trajectory = Trajectory {
                initial_state: self.episode[0].state.clone(),
                steps: core::mem::take(&mut self.episode),
            };
            for e in relabel_hindsight(&trajectory, self.config.relabel, &self.predicate)? {
                self.buffer.push(e);
            }
        }
        self.episode.clear();
        Ok(())
    }
}

impl Agent for DqnAgent {
    fn act(&mut self, state: &StateVec, goal: Option<&StateVec>, rng: &mut SeededRng) -> Result<ActionId> {
        let eps = self.epsilon();
        self.acted += 1;
        epsilon_greedy(&self.online, state, goal, eps, rng)
    }

    fn greedy_action(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<ActionId> {
        Ok(ActionId(math::argmax(&self.online.q_values(state, goal)?)))
    }

    fn collect_size(&self) -> usize {
        self.config.train_every
    }

    fn learn(&mut self, experiences: &[Experience], rng: &mut SeededRng) -> Result<LearnStats> {
        let mut stats = LearnStats::default();
        for e in experiences {
            self.buffer.push(e.clone());
            if self.config.relabel != RelabelStrategy::None {
                self.episode.push(e.clone());
            }
            if e.terminal || e.truncated {
                self.finish_episode()?;
            }
            self.pending += 1;
            if self.pending >= self.config.train_every && self.buffer.len() >= self.config.learning_starts {
                self.pending = 0;
                let loss = dqn_update(
                    &self.buffer,
                    &mut self.online,
                    &mut self.target,
                    &mut self.optimizer,
                    self.config.batch_size,
                    self.config.gamma,
                    self.config.target_sync_interval,
                    &mut self.updates,
                    rng,
                )?;
                stats.updates += 1;
                stats.loss = Some(loss);
            }
        }
        Ok(stats)
    }

    fn abandon_episode(&mut self) -> Result<()> {
        self.finish_episode()
    }

    fn reset_parameters(&mut self, rng: &mut SeededRng) -> Result<()> {
        self.online = MlpQ::new(
            self.online.state_dim,
            self.online.goal_dim,
            &self.config.hidden,
            self.online.action_count(),
            rng,
        )?;
        self.target = self.online.clone();
        self.optimizer = Optimizer::new(self.config.optimizer, self.config.learning_rate, self.online.net.param_count());
        Ok(())
    }

    fn params(&self) -> LearnerParams {
        LearnerParams::Dqn(self.online.clone())
    }
}
