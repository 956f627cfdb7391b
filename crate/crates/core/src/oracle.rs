//! Exact solutions of small MDPs: breadth-first enumeration of a model's
//! reachable states, value iteration, and policy evaluation.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::env::gridnav::{gridnav_step, Cell, GridNavConfig};
use crate::env::minibuild::{BuildAction, MiniBuildConfig, MiniBuildState};
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::ActionId;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_ITERATION_CAP: usize = 100_000;
pub const DEFAULT_STATE_CAP: usize = 100_000;

/// A model that can be expanded state by state.
pub trait FiniteModel {
    type State: Clone + Ord;

    fn action_count(&self) -> usize;

    fn initial_states(&self) -> Vec<Self::State>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// `(probability, next state, reward)` triples; probabilities sum to 1.
    fn outcomes(&self, state: &Self::State, action: ActionId) -> Result<Vec<(f64, Self::State, f64)>>;
}

/// GridNav towards the configured goal, ignoring the step limit. Every cell
/// is an initial state so the solution covers the whole grid.
impl FiniteModel for GridNavConfig {
    type State = Cell;

    fn action_count(&self) -> usize {
        crate::env::gridnav::ACTION_COUNT
    }

    fn initial_states(&self) -> Vec<Cell> {
        self.cells().collect()
    }

    fn is_terminal(&self, state: &Cell) -> bool {
        *state == self.goal
    }

    fn outcomes(&self, state: &Cell, action: ActionId) -> Result<Vec<(f64, Cell, f64)>> {
        let (next, result) = gridnav_step(*state, action, self, self.goal)?;
        Ok(vec![(1.0, next, result.reward)])
    }
}

/// MiniBuild from its configured initial state, the horizon being terminal.
impl FiniteModel for MiniBuildConfig {
    type State = MiniBuildState;

    fn action_count(&self) -> usize {
        crate::env::minibuild::ACTION_COUNT
    }

    fn initial_states(&self) -> Vec<MiniBuildState> {
        vec![self.initial]
    }

    fn is_terminal(&self, state: &MiniBuildState) -> bool {
        state.tick >= self.horizon
    }

    fn outcomes(&self, state: &MiniBuildState, action: ActionId) -> Result<Vec<(f64, MiniBuildState, f64)>> {
        let (next, reward, _) = self.transition(state, BuildAction::from_id(action)?);
        Ok(vec![(1.0, next, reward)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub probability: f64,
    pub reward: f64,
}

/// Explicit MDP over states `0..state_count()`. Terminal states absorb with
/// zero reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub action_count: usize,
    pub gamma: f64,
    /// `transitions[s][a]` lists the outcomes of action `a` in state `s`.
    pub transitions: Vec<Vec<Vec<Outcome>>>,
    pub terminal: Vec<bool>,
    pub initial: Vec<usize>,
}

impl TabularMdp {
    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Invalid("gamma must lie in [0, 1]".into()));
        }
        if self.terminal.len() != self.state_count() {
            return Err(Error::Invalid("terminal flags do not cover every state".into()));
        }
        for row in &self.transitions {
            if row.len() != self.action_count {
                return Err(Error::Invalid("transition table is not total".into()));
            }
            for outcomes in row {
                if outcomes.is_empty() {
                    return Err(Error::Invalid("action without outcomes".into()));
                }
                let total: f64 = outcomes.iter().map(|o| o.probability).sum();
                if (total - 1.0).abs() > 1e-9 || outcomes.iter().any(|o| o.probability < 0.0) {
                    return Err(Error::Invalid("outcome probabilities must sum to 1".into()));
                }
                if outcomes.iter().any(|o| o.next >= self.state_count() || !o.reward.is_finite()) {
                    return Err(Error::Invalid("outcome out of range or non-finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Same dynamics with every reward multiplied by `k`.
    pub fn scale_rewards(&self, k: f64) -> TabularMdp {
        let mut out = self.clone();
        for o in out.transitions.iter_mut().flatten().flatten() {
            o.reward *= k;
        }
        out
    }

    fn backup(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transitions[s][a]
            .iter()
            .map(|o| o.probability * (o.reward + self.gamma * v[o.next]))
            .sum()
    }
}

/// A tabular MDP together with the model states behind its indices.
#[derive(Debug, Clone)]
pub struct Enumerated<S> {
    pub mdp: TabularMdp,
    pub states: Vec<S>,
    index: BTreeMap<S, usize>,
}

impl<S: Ord> Enumerated<S> {
    pub fn index_of(&self, state: &S) -> Option<usize> {
        self.index.get(state).copied()
    }
}

/// Breadth-first closure of the states reachable from the model's initial
/// states. Fails once more than `max_states` states have been discovered.
pub fn enumerate_mdp<M: FiniteModel + ?Sized>(model: &M, gamma: f64, max_states: usize) -> Result<Enumerated<M::State>> {
    let actions = model.action_count();
    let mut index: BTreeMap<M::State, usize> = BTreeMap::new();
    let mut states: Vec<M::State> = Vec::new();
    let mut queue = VecDeque::new();
    let intern = |s: M::State, index: &mut BTreeMap<M::State, usize>, states: &mut Vec<M::State>, queue: &mut VecDeque<usize>| -> Result<usize> {
        if let Some(i) = index.get(&s) {
            return Ok(*i);
        }
        if states.len() >= max_states {
            return Err(Error::StateSpaceOverflow { limit: max_states });
        }
        let i = states.len();
        index.insert(s.clone(), i);
        states.push(s);
        queue.push_back(i);
        Ok(i)
    };
    let mut initial = Vec::new();
    for s in model.initial_states() {
        initial.push(intern(s, &mut index, &mut states, &mut queue)?);
    }
    let mut transitions: Vec<Vec<Vec<Outcome>>> = Vec::new();
    let mut terminal = Vec::new();
    while let Some(i) = queue.pop_front() {
        // states are discovered in index order, so row i is pushed in order
        debug_assert_eq!(transitions.len(), i);
        let s = states[i].clone();
        if model.is_terminal(&s) {
            terminal.push(true);
            transitions.push(vec![
                vec![Outcome {
                    next: i,
                    probability: 1.0,
                    reward: 0.0
                }];
                actions
            ]);
            continue;
        }
        terminal.push(false);
        let mut row = Vec::with_capacity(actions);
        for a in 0..actions {
            let mut outs = Vec::new();
            for (p, next, r) in model.outcomes(&s, ActionId(a))? {
                let j = intern(next, &mut index, &mut states, &mut queue)?;
                outs.push(Outcome {
                    next: j,
                    probability: p,
                    reward: r,
                });
            }
            row.push(outs);
        }
        transitions.push(row);
    }
    let mdp = TabularMdp {
        action_count: actions,
        gamma,
        transitions,
        terminal,
        initial,
    };
    mdp.validate()?;
    Ok(Enumerated { mdp, states, index })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationResult {
    /// `q[s][a]`.
    pub q: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm change of `v` after each sweep.
    pub residuals: Vec<f64>,
}

impl ValueIterationResult {
    /// Lowest-index maximising action per state.
    pub fn greedy_policy(&self) -> Vec<usize> {
        self.q.iter().map(|row| math::argmax(row)).collect()
    }
}

/// Synchronous value iteration from zero until the sup-norm change of a
/// sweep drops below `tolerance`.
pub fn value_iterate(mdp: &TabularMdp, tolerance: f64, max_iterations: usize) -> Result<ValueIterationResult> {
    mdp.validate()?;
    let n = mdp.state_count();
    let mut v = vec![0.0; n];
    let mut residuals = Vec::new();
    for it in 1..=max_iterations {
        let mut next = vec![0.0; n];
        let mut residual: f64 = 0.0;
        for s in 0..n {
            if !mdp.terminal[s] {
                next[s] = (0..mdp.action_count)
                    .map(|a| mdp.backup(s, a, &v))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            residual = residual.max((next[s] - v[s]).abs());
        }
        v = next;
        residuals.push(residual);
        if !residual.is_finite() {
            return Err(Error::Numeric("value iteration diverged".into()));
        }
        if residual < tolerance {
            let q = (0..n)
                .map(|s| {
                    (0..mdp.action_count)
                        .map(|a| if mdp.terminal[s] { 0.0 } else { mdp.backup(s, a, &v) })
                        .collect()
                })
                .collect();
            return Ok(ValueIterationResult {
                q,
                v,
                iterations: it,
                residual,
                residuals,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Puts all probability on one action per state.
pub fn deterministic_policy(actions: &[usize], action_count: usize) -> Vec<Vec<f64>> {
    actions
        .iter()
        .map(|a| {
            let mut row = vec![0.0; action_count];
            row[*a] = 1.0;
            row
        })
        .collect()
}

/// Expected return from every state under `policy[s][a] = pi(a | s)`, by
/// iterative evaluation to `tolerance`.
pub fn policy_return(mdp: &TabularMdp, policy: &[Vec<f64>], tolerance: f64, max_iterations: usize) -> Result<Vec<f64>> {
    mdp.validate()?;
    let n = mdp.state_count();
    if policy.len() != n || policy.iter().any(|row| row.len() != mdp.action_count) {
        return Err(Error::Invalid("policy must give a distribution for every state".into()));
    }
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let mut next = vec![0.0; n];
        residual = 0.0;
        for s in 0..n {
            if !mdp.terminal[s] {
                next[s] = policy[s]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(a, p)| p * mdp.backup(s, a, &v))
                    .sum();
            }
            residual = residual.max((next[s] - v[s]).abs());
        }
        v = next;
        if !residual.is_finite() {
            return Err(Error::Numeric("policy evaluation diverged".into()));
        }
        if residual < tolerance {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::gridnav::GridReward;
    use crate::env::minibuild::{RewardMode, CMAG_HORIZON};

    /// A: action 0 "go" to terminal B with reward 1, action 1 "stay" with 0.
    fn chain(gamma: f64) -> TabularMdp {
        let o = |next, reward| vec![Outcome { next, probability: 1.0, reward }];
        TabularMdp {
            action_count: 2,
            gamma,
            transitions: vec![vec![o(1, 1.0), o(0, 0.0)], vec![o(1, 0.0), o(1, 0.0)]],
            terminal: vec![false, true],
            initial: vec![0],
        }
    }

    #[test]
    fn two_state_chain() {
        let r = value_iterate(&chain(0.9), DEFAULT_TOLERANCE, DEFAULT_ITERATION_CAP).unwrap();
        assert!((r.q[0][0] - 1.0).abs() < 1e-9);
        assert!((r.q[0][1] - 0.9).abs() < 1e-9);
        assert_eq!(r.greedy_policy()[0], 0);
    }

    #[test]
    fn uniform_policy_on_chain() {
        // V = 0.5 * 1 + 0.5 * 0.9 * V
        let v = policy_return(&chain(0.9), &[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-12, 100_000).unwrap();
        assert!((v[0] - 0.5 / 0.55).abs() < 1e-9);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn all_zero_rewards() {
        let mdp = chain(0.9).scale_rewards(0.0);
        let r = value_iterate(&mdp, DEFAULT_TOLERANCE, 10).unwrap();
        assert!(r.q.iter().flatten().all(|q| *q == 0.0));
    }

    #[test]
    fn staying_forever_is_worth_nothing() {
        let v = policy_return(&chain(0.9), &deterministic_policy(&[1, 0], 2), 1e-12, 100).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn gridnav_counts() {
        for (size, n) in [(3, 9), (5, 25)] {
            let e = enumerate_mdp(&GridNavConfig::square(size, 100), 1.0, DEFAULT_STATE_CAP).unwrap();
            assert_eq!(e.mdp.state_count(), n);
            assert_eq!(e.mdp.action_count, 4);
        }
    }

    #[test]
    fn gridnav_values_are_negative_manhattan() {
        let mut c = GridNavConfig::square(5, 100);
        c.reward = GridReward::StepCost;
        c.goal = Cell::new(3, 1);
        let e = enumerate_mdp(&c, 1.0, DEFAULT_STATE_CAP).unwrap();
        let r = value_iterate(&e.mdp, DEFAULT_TOLERANCE, DEFAULT_ITERATION_CAP).unwrap();
        for (i, cell) in e.states.iter().enumerate() {
            assert_eq!(r.v[i], -f64::from(cell.manhattan(c.goal)));
        }
    }

    #[test]
    fn greedy_policy_reproduces_optimal_values() {
        let mut c = GridNavConfig::square(4, 100);
        c.reward = GridReward::StepCost;
        let e = enumerate_mdp(&c, 0.95, DEFAULT_STATE_CAP).unwrap();
        let r = value_iterate(&e.mdp, 1e-10, DEFAULT_ITERATION_CAP).unwrap();
        let pi = deterministic_policy(&r.greedy_policy(), 4);
        let v = policy_return(&e.mdp, &pi, 1e-10, DEFAULT_ITERATION_CAP).unwrap();
        for (a, b) in v.iter().zip(&r.v) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_never_increase() {
        let mut c = GridNavConfig::square(6, 100);
        c.goal = Cell::new(2, 4);
        let e = enumerate_mdp(&c, 0.9, DEFAULT_STATE_CAP).unwrap();
        let r = value_iterate(&e.mdp, 1e-10, DEFAULT_ITERATION_CAP).unwrap();
        for w in r.residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn affine_reward_scaling_keeps_argmax() {
        let mut c = GridNavConfig::square(5, 100);
        c.reward = GridReward::StepCost;
        let e = enumerate_mdp(&c, 0.9, DEFAULT_STATE_CAP).unwrap();
        let base = value_iterate(&e.mdp, 1e-10, DEFAULT_ITERATION_CAP).unwrap();
        let scaled = value_iterate(&e.mdp.scale_rewards(3.5), 1e-10, DEFAULT_ITERATION_CAP).unwrap();
        for (a, b) in base.q.iter().zip(&scaled.q) {
            let best = math::max(a);
            let best_scaled = math::max(b);
            for (x, y) in a.iter().zip(b) {
                // same optimal action sets, compared with a tolerance on ties
                assert_eq!((best - x).abs() < 1e-9, (best_scaled - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_cmag_overflows() {
        let c = MiniBuildConfig::new(CMAG_HORIZON, RewardMode::CollectAll, MiniBuildState::pristine());
        assert_eq!(
            enumerate_mdp(&c, 1.0, DEFAULT_STATE_CAP).err(),
            Some(Error::StateSpaceOverflow { limit: DEFAULT_STATE_CAP })
        );
    }

    #[test]
    fn short_minibuild_enumerates() {
        let c = MiniBuildConfig::new(4, RewardMode::CollectAll, MiniBuildState::pristine());
        let e = enumerate_mdp(&c, 1.0, DEFAULT_STATE_CAP).unwrap();
        let r = value_iterate(&e.mdp, DEFAULT_TOLERANCE, 100).unwrap();
        assert!(r.v[e.mdp.initial[0]] > 0.0);
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut c = GridNavConfig::square(5, 100);
        c.reward = GridReward::StepCost;
        let e = enumerate_mdp(&c, 1.0, DEFAULT_STATE_CAP).unwrap();
        assert!(matches!(value_iterate(&e.mdp, 1e-8, 3), Err(Error::NotConverged { .. })));
    }
}
