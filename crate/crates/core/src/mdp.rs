//! MDP vocabulary shared by every environment and learner, plus episodic
//! rollout and discounted returns.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub state_dim: usize,
    pub action_count: usize,
    pub gamma: f64,
    /// Episode horizon.
    pub max_steps: usize,
}

impl MdpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::Invalid("state_dim must be positive".into()));
        }
        if self.action_count == 0 {
            return Err(Error::Invalid("action_count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Invalid("gamma must lie in [0, 1]".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Invalid("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Flat feature vector describing a state (or a goal). Entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(StateVec(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit patterns of the entries; a total, hashable key for tabular lookups.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }

    /// `self` followed by `goal` when present; the input layout of
    /// goal-conditioned approximators.
    pub fn with_goal(&self, goal: Option<&StateVec>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + goal.map_or(0, |g| g.len()));
        out.extend_from_slice(&self.0);
        if let Some(g) = goal {
            out.extend_from_slice(&g.0);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn checked(index: usize, action_count: usize) -> Result<Self> {
        if index < action_count {
            Ok(ActionId(index))
        } else {
            Err(Error::InvalidAction {
                index,
                action_count,
            })
        }
    }
}

/// Outcome of one environment transition. `terminal` and `truncated` are
/// never both set: truncation means the horizon was hit and the value of
/// `next_state` is still meaningful for bootstrapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next_state: StateVec,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// One transition `(s, a, r, s', done)`, optionally tagged with the goal it
/// was collected (or relabeled) under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: StateVec,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateVec,
    pub terminal: bool,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<StateVec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_state: StateVec,
    pub steps: Vec<Experience>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|e| e.reward).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|e| e.reward).sum()
    }

    /// The state the episode ended in.
    pub fn final_state(&self) -> &StateVec {
        self.steps
            .last()
            .map_or(&self.initial_state, |e| &e.next_state)
    }

    pub fn reached_terminal(&self) -> bool {
        self.steps.last().is_some_and(|e| e.terminal)
    }

    /// Checks chaining (`steps[i].next_state == steps[i+1].state`) and that
    /// only the last step may be terminal.
    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.steps.first() {
            if first.state != self.initial_state {
                return Err(Error::Invalid("first step does not start at initial_state".into()));
            }
        }
        for pair in self.steps.windows(2) {
            if pair[0].next_state != pair[1].state {
                return Err(Error::Invalid("trajectory steps do not chain".into()));
            }
            if pair[0].terminal {
                return Err(Error::Invalid("terminal step before the end".into()));
            }
        }
        if self.steps.iter().any(|e| e.terminal && e.truncated) {
            return Err(Error::Invalid("step both terminal and truncated".into()));
        }
        Ok(())
    }
}

/// Common interface of every environment.
pub trait Environment {
    fn spec(&self) -> MdpSpec;

    fn reset(&mut self, rng: &mut SeededRng) -> Result<StateVec>;

    fn step(&mut self, action: ActionId) -> Result<StepResult>;

    /// Active goal of a goal-conditioned environment.
    fn goal(&self) -> Option<StateVec> {
        None
    }

    fn set_goal(&mut self, _goal: &StateVec) -> Result<()> {
        Err(Error::NotGoalConditioned)
    }
}

impl<E: Environment + ?Sized> Environment for alloc::boxed::Box<E> {
    fn spec(&self) -> MdpSpec {
        (**self).spec()
    }

    fn reset(&mut self, rng: &mut SeededRng) -> Result<StateVec> {
        (**self).reset(rng)
    }

    fn step(&mut self, action: ActionId) -> Result<StepResult> {
        (**self).step(action)
    }

    fn goal(&self) -> Option<StateVec> {
        (**self).goal()
    }

    fn set_goal(&mut self, goal: &StateVec) -> Result<()> {
        (**self).set_goal(goal)
    }
}

/// `sum_i gamma^i * rewards[i]`, evaluated back to front so that
/// `G = r_0 + gamma * G(tail)` holds exactly.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if !gamma.is_finite() || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Invalid("gamma must lie in [0, 1]".into()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rewards"));
    }
    Ok(rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc))
}

/// Runs one episode from a fresh reset. If `goal` is given the environment
/// is switched to it; every step is tagged with the active goal.
pub fn rollout_episode<E, P>(
    env: &mut E,
    mut policy: P,
    rng: &mut SeededRng,
    goal: Option<&StateVec>,
) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: FnMut(&StateVec, Option<&StateVec>, &mut SeededRng) -> ActionId,
{
    let spec = env.spec();
    let initial_state = env.reset(rng)?;
    if let Some(g) = goal {
        env.set_goal(g)?;
    }
    let goal = env.goal();
    let mut state = initial_state.clone();
    let mut steps = Vec::new();
    loop {
        let action = policy(&state, goal.as_ref(), rng);
        ActionId::checked(action.0, spec.action_count)?;
        let mut result = env.step(action)?;
        if !result.terminal && steps.len() + 1 >= spec.max_steps {
            result.truncated = true;
        }
        let done = result.done();
        steps.push(Experience {
            state: core::mem::replace(&mut state, result.next_state.clone()),
            action,
            reward: result.reward,
            next_state: result.next_state,
            terminal: result.terminal,
            truncated: result.truncated,
            goal: goal.clone(),
        });
        if done {
            break;
        }
    }
    Ok(Trajectory {
        initial_state,
        steps,
    })
}
