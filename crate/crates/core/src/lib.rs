//! Core of a hierarchical reinforcement-learning framework in which a human
//! designer decomposes a task into an ordered chain of subtasks, each with its
//! own reward signal and advancement threshold.
//!
//! The crate is `no_std` (it only needs `alloc`) and contains no IO:
//!
//! * [`mdp`]: states, transitions, trajectories, episodic rollout and returns.
//! * [`env`]: the MiniBuild RTS-economy environment, GridNav, and the subtask
//!   decompositions for the CollectMineralsAndGas and BuildMarines tasks.
//! * [`replay`]: FIFO experience replay, goal rewards and hindsight relabeling.
//! * [`learn`]: tabular Q-learning, an MLP with hand-written backprop, DQN and
//!   PPO-clip actor-critic agents.
//! * [`curriculum`]: the subtask executor with per-subtask sample budgets and
//!   running-average thresholds, plus the flat baseline.
//! * [`oracle`]: exact value iteration and policy evaluation on enumerated MDPs.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod curriculum;
pub mod env;
pub mod error;
pub mod learn;
pub mod math;
pub mod mdp;
pub mod oracle;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{ActionId, Environment, Experience, MdpSpec, StateVec, StepResult, Trajectory};
pub use rng::SeededRng;
