use serde::{Deserialize, Serialize};

use super::params::LearnerParams;
use super::qvalue::{bellman_target, epsilon_greedy, EpsilonSchedule, QFunction, TabularQ};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, Experience, StateVec};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LearnStats {
    /// Gradient or table updates performed.
    pub updates: usize,
    /// Loss of the last update, when the learner has one.
    pub loss: Option<f64>,
}

/// What the curriculum executor needs from a learner: an exploratory policy,
/// a greedy policy, and an update from freshly collected experience.
pub trait Agent {
    /// Exploratory action (epsilon-greedy or a policy sample).
    fn act(&mut self, state: &StateVec, goal: Option<&StateVec>, rng: &mut SeededRng) -> Result<ActionId>;

    fn greedy_action(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<ActionId>;

    /// Environment steps to collect between two calls to [`learn`](Agent::learn).
    fn collect_size(&self) -> usize;

    fn learn(&mut self, experiences: &[Experience], rng: &mut SeededRng) -> Result<LearnStats>;

    /// The episode in progress will never be continued (its subtask ended).
    fn abandon_episode(&mut self) -> Result<()> {
        Ok(())
    }

    /// Re-initialises all trainable parameters.
    fn reset_parameters(&mut self, rng: &mut SeededRng) -> Result<()>;

    fn params(&self) -> LearnerParams;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularConfig {
    /// Step size of the Q-learning update.
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            alpha: 0.5,
            gamma: 0.99,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Invalid("alpha must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Invalid("gamma must lie in [0, 1]".into()));
        }
        self.epsilon.validate()
    }
}

/// One-step Q-learning on a lookup table, updated online after every step.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    pub q: TabularQ,
    config: TabularConfig,
    steps: u64,
}

impl TabularAgent {
    pub fn new(state_dim: usize, goal_dim: usize, action_count: usize, config: TabularConfig) -> Result<Self> {
        config.validate()?;
        Ok(TabularAgent {
            q: TabularQ::new(state_dim, goal_dim, action_count)?,
            config,
            steps: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.steps)
    }
}

impl Agent for TabularAgent {
    fn act(&mut self, state: &StateVec, goal: Option<&StateVec>, rng: &mut SeededRng) -> Result<ActionId> {
        let eps = self.epsilon();
        self.steps += 1;
        epsilon_greedy(&self.q, state, goal, eps, rng)
    }

    fn greedy_action(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<ActionId> {
        Ok(ActionId(crate::math::argmax(&self.q.q_values(state, goal)?)))
    }

    fn collect_size(&self) -> usize {
        1
    }

    fn learn(&mut self, experiences: &[Experience], _rng: &mut SeededRng) -> Result<LearnStats> {
        let mut stats = LearnStats::default();
        for e in experiences {
            let goal = e.goal.as_ref();
            let y = bellman_target(e.reward, &e.next_state, goal, e.terminal, e.truncated, &self.q, self.config.gamma)?;
            let before = self.q.q_values(&e.state, goal)?[e.action.0];
            self.q.update(&e.state, goal, e.action, y, self.config.alpha)?;
            stats.updates += 1;
            stats.loss = Some((y - before) * (y - before));
        }
        if !self.q.is_finite() {
            return Err(Error::Numeric("tabular values became non-finite".into()));
        }
        Ok(stats)
    }

    fn reset_parameters(&mut self, _rng: &mut SeededRng) -> Result<()> {
        self.q = TabularQ::new(self.q.state_dim, self.q.goal_dim, self.q.action_count())?;
        Ok(())
    }

    fn params(&self) -> LearnerParams {
        LearnerParams::Tabular(self.q.clone())
    }
}
