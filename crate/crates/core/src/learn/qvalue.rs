//! Action-value functions `Q(s, a | g)`, Bellman targets, the TD loss and
//! epsilon-greedy action selection.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{ActionId, Experience, StateVec};
use crate::rng::SeededRng;

pub trait QFunction {
    fn action_count(&self) -> usize;

    /// One value per action. Goal-conditioned functions require `goal`.
    fn q_values(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<f64>>;
}

fn check_goal(goal_dim: usize, goal: Option<&StateVec>) -> Result<()> {
    let found = goal.map_or(0, |g| g.len());
    if found != goal_dim {
        return Err(Error::DimensionMismatch {
            what: "goal",
            expected: goal_dim,
            found,
        });
    }
    Ok(())
}

fn check_state(state_dim: usize, state: &StateVec) -> Result<()> {
    if state.len() != state_dim {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: state_dim,
            found: state.len(),
        });
    }
    Ok(())
}

/// Q-network over the concatenated `state ++ goal` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpQ {
    pub net: Mlp,
    pub state_dim: usize,
    pub goal_dim: usize,
}

impl MlpQ {
    pub fn new(
        state_dim: usize,
        goal_dim: usize,
        hidden: &[usize],
        action_count: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let net = Mlp::new(&layer_sizes(state_dim + goal_dim, hidden, action_count), rng)?;
        Ok(MlpQ {
            net,
            state_dim,
            goal_dim,
        })
    }

    pub fn zeros(state_dim: usize, goal_dim: usize, hidden: &[usize], action_count: usize) -> Result<Self> {
        Ok(MlpQ {
            net: Mlp::zeros(&layer_sizes(state_dim + goal_dim, hidden, action_count))?,
            state_dim,
            goal_dim,
        })
    }

    pub fn input(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<f64>> {
        check_state(self.state_dim, state)?;
        check_goal(self.goal_dim, goal)?;
        Ok(state.with_goal(goal))
    }
}

pub(crate) fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

impl QFunction for MlpQ {
    fn action_count(&self) -> usize {
        self.net.output_dim()
    }

    fn q_values(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<f64>> {
        self.net.forward(&self.input(state, goal)?)
    }
}

/// Lookup table keyed by the bit patterns of `state ++ goal`; unseen entries
/// read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TabularRepr", try_from = "TabularRepr")]
pub struct TabularQ {
    pub state_dim: usize,
    pub goal_dim: usize,
    action_count: usize,
    table: BTreeMap<Vec<u64>, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TabularRepr {
    state_dim: usize,
    goal_dim: usize,
    action_count: usize,
    entries: Vec<TabularEntry>,
}

#[derive(Serialize, Deserialize)]
struct TabularEntry {
    key: Vec<f64>,
    values: Vec<f64>,
}

impl From<TabularQ> for TabularRepr {
    fn from(q: TabularQ) -> Self {
        TabularRepr {
            state_dim: q.state_dim,
            goal_dim: q.goal_dim,
            action_count: q.action_count,
            entries: q
                .table
                .into_iter()
                .map(|(k, values)| TabularEntry {
                    key: k.into_iter().map(f64::from_bits).collect(),
                    values,
                })
                .collect(),
        }
    }
}

impl TryFrom<TabularRepr> for TabularQ {
    type Error = Error;

    fn try_from(r: TabularRepr) -> Result<Self> {
        let mut q = TabularQ::new(r.state_dim, r.goal_dim, r.action_count)?;
        for e in r.entries {
            if e.key.len() != r.state_dim + r.goal_dim || e.values.len() != r.action_count {
                return Err(Error::Invalid("tabular entry has the wrong shape".into()));
            }
            q.table.insert(e.key.iter().map(|v| v.to_bits()).collect(), e.values);
        }
        Ok(q)
    }
}

impl TabularQ {
    pub fn new(state_dim: usize, goal_dim: usize, action_count: usize) -> Result<Self> {
        if action_count == 0 {
            return Err(Error::Invalid("action_count must be positive".into()));
        }
        Ok(TabularQ {
            state_dim,
            goal_dim,
            action_count,
            table: BTreeMap::new(),
        })
    }

    fn key(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<u64>> {
        check_state(self.state_dim, state)?;
        check_goal(self.goal_dim, goal)?;
        Ok(state.with_goal(goal).iter().map(|v| v.to_bits()).collect())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn set(&mut self, state: &StateVec, goal: Option<&StateVec>, action: ActionId, value: f64) -> Result<()> {
        ActionId::checked(action.0, self.action_count)?;
        let key = self.key(state, goal)?;
        let n = self.action_count;
        self.table.entry(key).or_insert_with(|| vec![0.0; n])[action.0] = value;
        Ok(())
    }

    /// `Q(s, a) += alpha * (target - Q(s, a))`.
    pub fn update(
        &mut self,
        state: &StateVec,
        goal: Option<&StateVec>,
        action: ActionId,
        target: f64,
        alpha: f64,
    ) -> Result<()> {
        let q = self.q_values(state, goal)?[action.0];
        self.set(state, goal, action, q + alpha * (target - q))
    }

    pub fn is_finite(&self) -> bool {
        self.table.values().flatten().all(|v| v.is_finite())
    }
}

impl QFunction for TabularQ {
    fn action_count(&self) -> usize {
        self.action_count
    }

    fn q_values(&self, state: &StateVec, goal: Option<&StateVec>) -> Result<Vec<f64>> {
        let key = self.key(state, goal)?;
        Ok(self
            .table
            .get(&key)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.action_count]))
    }
}

/// `r` on terminal transitions, otherwise `r + gamma * max_a Q_target(s', a)`.
/// Truncated transitions bootstrap like non-terminal ones.
pub fn bellman_target<Q: QFunction + ?Sized>(
    reward: f64,
    next_state: &StateVec,
    goal: Option<&StateVec>,
    terminal: bool,
    truncated: bool,
    target: &Q,
    gamma: f64,
) -> Result<f64> {
    debug_assert!(!(terminal && truncated));
    if terminal || gamma == 0.0 {
        return Ok(reward);
    }
    Ok(reward + gamma * math::max(&target.q_values(next_state, goal)?))
}

/// Mean squared TD error over `batch` and its gradient with respect to the
/// online network. Targets come from `target` and carry no gradient.
pub fn td_loss(batch: &[&Experience], online: &MlpQ, target: &MlpQ, gamma: f64) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = vec![0.0; online.net.param_count()];
    let mut upstream = vec![0.0; online.action_count()];
    let mut loss = 0.0;
    for e in batch {
        let goal = e.goal.as_ref();
        let y = bellman_target(e.reward, &e.next_state, goal, e.terminal, e.truncated, target, gamma)?;
        let cache = online.net.forward_cached(&online.input(&e.state, goal)?)?;
        let a = ActionId::checked(e.action.0, online.action_count())?.0;
        let err = cache.output()[a] - y;
        loss += err * err / n;
        upstream.iter_mut().for_each(|u| *u = 0.0);
        upstream[a] = 2.0 * err / n;
        online.net.backward(&cache, &upstream, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Uniformly random action with probability `epsilon`, else the greedy one
/// (lowest index on ties). With `epsilon == 0` no randomness is consumed.
pub fn epsilon_greedy<Q: QFunction + ?Sized>(
    q: &Q,
    state: &StateVec,
    goal: Option<&StateVec>,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<ActionId> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Invalid("epsilon must lie in [0, 1]".into()));
    }
    if epsilon > 0.0 && rng.unit() < epsilon {
        return Ok(ActionId(rng.below(q.action_count())));
    }
    Ok(ActionId(math::argmax(&q.q_values(state, goal)?)))
}

/// Linear decay from `start` to `end` over `decay_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_steps: 10_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.start) || !(0.0..=1.0).contains(&self.end) {
            return Err(Error::Invalid("epsilon bounds must lie in [0, 1]".into()));
        }
        if self.end > self.start {
            return Err(Error::Invalid("epsilon end exceeds start".into()));
        }
        Ok(())
    }

    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> StateVec {
        StateVec::new(v.to_vec()).unwrap()
    }

    /// Fixed action values, for exercising selection rules.
    struct Fixed(Vec<f64>);

    impl QFunction for Fixed {
        fn action_count(&self) -> usize {
            self.0.len()
        }
        fn q_values(&self, _: &StateVec, _: Option<&StateVec>) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn greedy_picks_argmax_and_low_ties() {
        let mut rng = SeededRng::new(0);
        let s = sv(&[0.0]);
        assert_eq!(epsilon_greedy(&Fixed(vec![1.0, 3.0, 2.0]), &s, None, 0.0, &mut rng).unwrap(), ActionId(1));
        assert_eq!(epsilon_greedy(&Fixed(vec![2.0, 2.0, 1.0]), &s, None, 0.0, &mut rng).unwrap(), ActionId(0));
    }

    #[test]
    fn full_exploration_is_uniform() {
        // 10^5 draws over 4 actions: each count within 3 sigma of 25_000.
        let mut rng = SeededRng::new(11);
        let q = Fixed(vec![0.0, 5.0, 0.0, 0.0]);
        let s = sv(&[0.0]);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[epsilon_greedy(&q, &s, None, 1.0, &mut rng).unwrap().0] += 1;
        }
        let sigma = math::sqrt(n as f64 * 0.25 * 0.75);
        for c in counts {
            assert!((c as f64 - 25_000.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn bellman_target_examples() {
        let q = Fixed(vec![2.0, -1.0]);
        let s = sv(&[0.0]);
        assert_eq!(bellman_target(5.0, &s, None, true, false, &q, 0.9).unwrap(), 5.0);
        assert!((bellman_target(1.0, &s, None, false, false, &q, 0.9).unwrap() - 2.8).abs() < 1e-12);
        assert!((bellman_target(1.0, &s, None, false, true, &q, 0.9).unwrap() - 2.8).abs() < 1e-12);
        assert_eq!(bellman_target(1.0, &s, None, false, false, &q, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_mlp_gives_zero_values() {
        let q = MlpQ::zeros(3, 0, &[8, 8], 4).unwrap();
        assert_eq!(q.q_values(&sv(&[1.0, 2.0, 3.0]), None).unwrap(), vec![0.0; 4]);
        assert!(q.q_values(&sv(&[1.0]), None).is_err());
        assert!(q.q_values(&sv(&[1.0, 2.0, 3.0]), Some(&sv(&[1.0]))).is_err());
    }

    #[test]
    fn tabular_update_is_local() {
        let mut q = TabularQ::new(1, 0, 3).unwrap();
        let (a, b) = (sv(&[0.0]), sv(&[1.0]));
        q.update(&a, None, ActionId(2), 4.0, 0.5).unwrap();
        assert_eq!(q.q_values(&a, None).unwrap(), vec![0.0, 0.0, 2.0]);
        assert_eq!(q.q_values(&b, None).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn td_loss_fixed_point_and_arithmetic() {
        let q = MlpQ::zeros(1, 0, &[4], 2).unwrap();
        let e = Experience {
            state: sv(&[1.0]),
            action: ActionId(0),
            reward: 2.0,
            next_state: sv(&[0.0]),
            terminal: true,
            truncated: false,
            goal: None,
        };
        let (loss, _) = td_loss(&[&e], &q, &q, 0.9).unwrap();
        assert_eq!(loss, 4.0);
        let e0 = Experience { reward: 0.0, ..e };
        let (loss, grads) = td_loss(&[&e0], &q, &q, 0.9).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| *g == 0.0));
        assert_eq!(td_loss(&[], &q, &q, 0.9), Err(Error::EmptyBatch));
    }

    #[test]
    fn schedule_decays_linearly() {
        let s = EpsilonSchedule {
            start: 1.0,
            end: 0.1,
            decay_steps: 10,
        };
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(5) - 0.55).abs() < 1e-12);
        assert_eq!(s.value(10), 0.1);
        assert_eq!(s.value(1000), 0.1);
        assert!(EpsilonSchedule { start: 0.1, end: 0.5, decay_steps: 1 }.validate().is_err());
    }

    #[test]
    fn tabular_serde_round_trip_shape() {
        let mut q = TabularQ::new(2, 0, 2).unwrap();
        q.set(&sv(&[0.25, 1.0]), None, ActionId(1), -3.5).unwrap();
        let repr: TabularRepr = q.clone().into();
        let back = TabularQ::try_from(repr).unwrap();
        assert_eq!(back, q);
    }
}
