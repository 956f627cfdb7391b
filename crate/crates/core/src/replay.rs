//! Experience replay: a FIFO ring buffer with uniform sampling, the sparse
//! goal-conditioned reward, and hindsight relabeling.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Experience, StateVec, Trajectory};
use crate::rng::SeededRng;

/// A stored tuple together with its insertion sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub seq: u64,
    pub experience: Experience,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: VecDeque<Slot>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Invalid("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            slots: VecDeque::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of pushes since creation.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Appends `experience`, evicting the oldest tuple once full.
    pub fn push(&mut self, experience: Experience) {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(Slot {
            seq: self.inserted,
            experience,
        });
        self.inserted += 1;
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Slot> {
        self.slots.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Experience> {
        self.slots.get(index).map(|s| &s.experience)
    }

    /// `batch_size` independent uniform draws, with replacement.
    pub fn sample_uniform(&self, batch_size: usize, rng: &mut SeededRng) -> Result<Vec<&Experience>> {
        if self.slots.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..batch_size)
            .map(|_| &self.slots[rng.below(self.slots.len())].experience)
            .collect())
    }
}

/// Goal test `f: S -> {0, 1}`: every feature within `tolerance` of the goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPredicate {
    pub tolerance: f64,
}

impl Default for GoalPredicate {
    fn default() -> Self {
        GoalPredicate { tolerance: 1e-6 }
    }
}

impl GoalPredicate {
    pub fn matches(&self, state: &StateVec, goal: &StateVec) -> Result<bool> {
        if state.len() != goal.len() {
            return Err(Error::DimensionMismatch {
                what: "goal",
                expected: state.len(),
                found: goal.len(),
            });
        }
        Ok(state
            .as_slice()
            .iter()
            .zip(goal.as_slice())
            .all(|(s, g)| (s - g).abs() <= self.tolerance))
    }
}

/// Sparse goal reward: 0 when `next_state` satisfies `goal`, otherwise -1.
pub fn goal_reward(
    state: &StateVec,
    _action: ActionId,
    next_state: &StateVec,
    goal: &StateVec,
    predicate: &GoalPredicate,
) -> Result<f64> {
    if state.len() != next_state.len() {
        return Err(Error::DimensionMismatch {
            what: "next_state",
            expected: state.len(),
            found: next_state.len(),
        });
    }
    Ok(if predicate.matches(next_state, goal)? {
        0.0
    } else {
        -1.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelabelStrategy {
    #[default]
    None,
    /// Relabel with the state the trajectory actually ended in.
    Final,
}

/// Hindsight copies of every step of `trajectory`, with the goal replaced by
/// the achieved final state and rewards recomputed through [`goal_reward`].
/// A relabeled step is terminal exactly when it reaches that goal.
pub fn relabel_hindsight(
    trajectory: &Trajectory,
    strategy: RelabelStrategy,
    predicate: &GoalPredicate,
) -> Result<Vec<Experience>> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    match strategy {
        RelabelStrategy::None => Ok(Vec::new()),
        RelabelStrategy::Final => {
            let achieved = trajectory.final_state().clone();
            trajectory
                .steps
                .iter()
                .map(|e| {
                    let reward = goal_reward(&e.state, e.action, &e.next_state, &achieved, predicate)?;
                    let reached = reward == 0.0;
                    Ok(Experience {
                        state: e.state.clone(),
                        action: e.action,
                        reward,
                        next_state: e.next_state.clone(),
                        terminal: reached,
                        truncated: !reached && e.truncated,
                        goal: Some(achieved.clone()),
                    })
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sv(v: &[f64]) -> StateVec {
        StateVec::new(v.to_vec()).unwrap()
    }

    fn exp(tag: f64) -> Experience {
        Experience {
            state: sv(&[tag]),
            action: ActionId(0),
            reward: tag,
            next_state: sv(&[tag + 1.0]),
            terminal: false,
            truncated: false,
            goal: None,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2).unwrap();
        assert!(b.is_empty());
        b.push(exp(1.0));
        assert_eq!(b.len(), 1);
        b.push(exp(2.0));
        b.push(exp(3.0));
        let held: Vec<f64> = b.iter().map(|s| s.experience.reward).collect();
        assert_eq!(held, vec![2.0, 3.0]);
        assert_eq!(b.inserted(), 3);
    }

    #[test]
    fn full_buffer_holds_exactly_what_was_pushed() {
        let mut b = ReplayBuffer::new(5).unwrap();
        for i in 0..5 {
            b.push(exp(i as f64));
        }
        let held: Vec<f64> = b.iter().map(|s| s.experience.reward).collect();
        assert_eq!(held, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = SeededRng::new(1);
        let mut b = ReplayBuffer::new(4).unwrap();
        assert_eq!(b.sample_uniform(3, &mut rng), Err(Error::EmptyBuffer));
        b.push(exp(9.0));
        let batch = b.sample_uniform(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|e| e.reward == 9.0));
        assert!(b.sample_uniform(0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn goal_reward_success_and_failure() {
        let p = GoalPredicate::default();
        let s = sv(&[0.0, 0.0]);
        assert_eq!(goal_reward(&s, ActionId(0), &sv(&[1.0, 0.0]), &sv(&[1.0, 0.0]), &p), Ok(0.0));
        assert_eq!(goal_reward(&s, ActionId(0), &sv(&[0.5, 0.0]), &sv(&[1.0, 0.0]), &p), Ok(-1.0));
        assert!(goal_reward(&s, ActionId(0), &sv(&[0.5, 0.0]), &sv(&[1.0]), &p).is_err());
    }

    fn walk(cells: &[f64], goal: f64) -> Trajectory {
        let p = GoalPredicate::default();
        let g = sv(&[goal]);
        let steps = cells
            .windows(2)
            .map(|w| {
                let r = goal_reward(&sv(&[w[0]]), ActionId(1), &sv(&[w[1]]), &g, &p).unwrap();
                Experience {
                    state: sv(&[w[0]]),
                    action: ActionId(1),
                    reward: r,
                    next_state: sv(&[w[1]]),
                    terminal: r == 0.0,
                    truncated: false,
                    goal: Some(g.clone()),
                }
            })
            .collect();
        Trajectory {
            initial_state: sv(&[cells[0]]),
            steps,
        }
    }

    #[test]
    fn failed_trajectory_gets_one_success() {
        let t = walk(&[0.0, 1.0, 2.0, 3.0], 9.0);
        let out = relabel_hindsight(&t, RelabelStrategy::Final, &GoalPredicate::default()).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.iter().filter(|e| e.reward == 0.0).count(), 1);
        let last = out.last().unwrap();
        assert!(last.terminal && last.reward == 0.0);
        assert!(out.iter().all(|e| e.goal == Some(sv(&[3.0]))));
        // originals untouched
        assert!(t.steps.iter().all(|e| e.reward == -1.0));
    }

    #[test]
    fn successful_trajectory_is_a_fixed_point() {
        let t = walk(&[0.0, 1.0, 2.0], 2.0);
        let out = relabel_hindsight(&t, RelabelStrategy::Final, &GoalPredicate::default()).unwrap();
        assert_eq!(out, t.steps);
    }

    #[test]
    fn single_step_and_empty() {
        let t = walk(&[0.0, 1.0], 5.0);
        let out = relabel_hindsight(&t, RelabelStrategy::Final, &GoalPredicate::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].terminal && out[0].reward == 0.0);
        let empty = Trajectory {
            initial_state: sv(&[0.0]),
            steps: vec![],
        };
        assert_eq!(
            relabel_hindsight(&empty, RelabelStrategy::Final, &GoalPredicate::default()),
            Err(Error::EmptyTrajectory)
        );
    }
}
