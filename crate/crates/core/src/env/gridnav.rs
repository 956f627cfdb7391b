//! GridNav: deterministic grid navigation towards a (possibly per-episode)
//! goal cell. Observations and goals are `[x / (w - 1), y / (h - 1)]`.
//!
//! Actions: 0 up (y - 1), 1 down (y + 1), 2 left (x - 1), 3 right (x + 1).
//! Moves off the grid leave the agent in place.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, MdpSpec, StateVec, StepResult};
use crate::replay::{goal_reward, GoalPredicate};
use crate::rng::SeededRng;

pub const ACTION_COUNT: usize = 4;
pub const STATE_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridReward {
    /// -1 per step, 0 on the step that reaches the goal.
    #[default]
    SparseGoal,
    /// -1 on every step, including the one that reaches the goal.
    StepCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridNavConfig {
    pub width: u32,
    pub height: u32,
    pub start: Cell,
    pub goal: Cell,
    /// Ordered intermediate subgoals, used to derive a waypoint curriculum.
    #[serde(default)]
    pub waypoints: Vec<Cell>,
    #[serde(default)]
    pub reward: GridReward,
    pub max_steps: usize,
    /// Draw the start uniformly (excluding the goal) on every reset.
    #[serde(default)]
    pub random_start: bool,
    /// Draw the goal uniformly on every reset.
    #[serde(default)]
    pub random_goal: bool,
}

impl GridNavConfig {
    /// `size x size` grid from the top-left corner to the bottom-right one.
    pub fn square(size: u32, max_steps: usize) -> Self {
        GridNavConfig {
            width: size,
            height: size,
            start: Cell::new(0, 0),
            goal: Cell::new(size - 1, size - 1),
            waypoints: Vec::new(),
            reward: GridReward::SparseGoal,
            max_steps,
            random_start: false,
            random_goal: false,
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invalid("grid dimensions must be positive".into()));
        }
        if self.width * self.height < 2 {
            return Err(Error::Invalid("grid needs at least two cells".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Invalid("max_steps must be positive".into()));
        }
        for (name, c) in [("start", self.start), ("goal", self.goal)] {
            if !self.contains(c) {
                return Err(Error::Invalid(alloc::format!("{name} outside the grid")));
            }
        }
        if !self.random_start && !self.random_goal && self.start == self.goal {
            return Err(Error::Invalid("start equals goal".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !self.contains(*w) {
                return Err(Error::Invalid("waypoint outside the grid".into()));
            }
            if self.waypoints[..i].contains(w) {
                return Err(Error::Invalid("waypoints must be distinct".into()));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> MdpSpec {
        MdpSpec {
            state_dim: STATE_DIM,
            action_count: ACTION_COUNT,
            gamma: 1.0,
            max_steps: self.max_steps,
        }
    }

    pub fn cell_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn encode(&self, c: Cell) -> StateVec {
        let axis = |v: u32, n: u32| if n > 1 { f64::from(v) / f64::from(n - 1) } else { 0.0 };
        StateVec::new(alloc::vec![axis(c.x, self.width), axis(c.y, self.height)])
            .expect("finite coordinates")
    }

    /// Inverse of [`encode`](Self::encode) for vectors that name a grid cell.
    pub fn decode(&self, v: &StateVec) -> Result<Cell> {
        if v.len() != STATE_DIM {
            return Err(Error::DimensionMismatch {
                what: "grid cell",
                expected: STATE_DIM,
                found: v.len(),
            });
        }
        let axis = |f: f64, n: u32| -> Result<u32> {
            let scaled = if n > 1 { f * f64::from(n - 1) } else { f };
            let r = libm::round(scaled);
            if (scaled - r).abs() > 1e-6 || r < 0.0 || r >= f64::from(n) {
                return Err(Error::Invalid("vector does not name a grid cell".into()));
            }
            Ok(r as u32)
        };
        Ok(Cell::new(axis(v.as_slice()[0], self.width)?, axis(v.as_slice()[1], self.height)?))
    }

    pub fn moved(&self, c: Cell, action: ActionId) -> Result<Cell> {
        Ok(match action.0 {
            0 => Cell::new(c.x, c.y.saturating_sub(1)),
            1 => Cell::new(c.x, (c.y + 1).min(self.height - 1)),
            2 => Cell::new(c.x.saturating_sub(1), c.y),
            3 => Cell::new((c.x + 1).min(self.width - 1), c.y),
            index => {
                return Err(Error::InvalidAction {
                    index,
                    action_count: ACTION_COUNT,
                })
            }
        })
    }
}

/// One move from `cell` towards `goal`. Terminal when the goal is reached;
/// truncation is the caller's concern.
pub fn gridnav_step(
    cell: Cell,
    action: ActionId,
    config: &GridNavConfig,
    goal: Cell,
) -> Result<(Cell, StepResult)> {
    let next = config.moved(cell, action)?;
    let next_state = config.encode(next);
    let reward = match config.reward {
        GridReward::SparseGoal => goal_reward(
            &config.encode(cell),
            action,
            &next_state,
            &config.encode(goal),
            &GoalPredicate::default(),
        )?,
        GridReward::StepCost => -1.0,
    };
    Ok((
        next,
        StepResult {
            next_state,
            reward,
            terminal: next == goal,
            truncated: false,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct GridNavEnv {
    config: GridNavConfig,
    pos: Cell,
    goal: Cell,
    steps: usize,
}

impl GridNavEnv {
    pub fn new(config: GridNavConfig) -> Result<Self> {
        config.validate()?;
        let (pos, goal) = (config.start, config.goal);
        Ok(GridNavEnv {
            config,
            pos,
            goal,
            steps: 0,
        })
    }

    pub fn config(&self) -> &GridNavConfig {
        &self.config
    }

    pub fn position(&self) -> Cell {
        self.pos
    }

    pub fn goal_cell(&self) -> Cell {
        self.goal
    }

    fn random_cell(&self, rng: &mut SeededRng, exclude: Option<Cell>) -> Cell {
        loop {
            let i = rng.below(self.config.cell_count()) as u32;
            let c = Cell::new(i % self.config.width, i / self.config.width);
            if Some(c) != exclude {
                return c;
            }
        }
    }
}

impl Environment for GridNavEnv {
    fn spec(&self) -> MdpSpec {
        self.config.spec()
    }

    fn reset(&mut self, rng: &mut SeededRng) -> Result<StateVec> {
        self.goal = if self.config.random_goal {
            let exclude = (!self.config.random_start).then_some(self.config.start);
            self.random_cell(rng, exclude)
        } else {
            self.config.goal
        };
        self.pos = if self.config.random_start {
            self.random_cell(rng, Some(self.goal))
        } else {
            self.config.start
        };
        self.steps = 0;
        Ok(self.config.encode(self.pos))
    }

    fn step(&mut self, action: ActionId) -> Result<StepResult> {
        let (next, mut result) = gridnav_step(self.pos, action, &self.config, self.goal)?;
        self.pos = next;
        self.steps += 1;
        if !result.terminal && self.steps >= self.config.max_steps {
            result.truncated = true;
        }
        Ok(result)
    }

    fn goal(&self) -> Option<StateVec> {
        Some(self.config.encode(self.goal))
    }

    fn set_goal(&mut self, goal: &StateVec) -> Result<()> {
        self.goal = self.config.decode(goal)?;
        Ok(())
    }
}
