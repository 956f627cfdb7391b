//! Exact Q* for GridNav layouts, exported as CSV.

use std::path::Path;

use subgoal_core::env::gridnav::Cell;
use subgoal_core::env::{GridNavConfig, GridReward};
use subgoal_core::oracle::{enumerate_mdp, value_iterate, Enumerated, ValueIterationResult};
use subgoal_core::oracle::{DEFAULT_ITERATION_CAP, DEFAULT_STATE_CAP, DEFAULT_TOLERANCE};

use crate::error::{HarnessError, Result};
use crate::output;

/// Parses `gridnavN` into an N×N grid with the goal in the far corner.
pub fn parse_gridnav_name(name: &str) -> Result<GridNavConfig> {
    let size: u32 = name
        .strip_prefix("gridnav")
        .and_then(|n| n.parse().ok())
        .filter(|n| *n >= 1)
        .ok_or_else(|| HarnessError::Config(format!("unknown oracle environment {name:?} (expected gridnavN)")))?;
    Ok(GridNavConfig::square(size, 4 * (size as usize) * (size as usize)))
}

pub fn solve_gridnav(config: &GridNavConfig, gamma: f64) -> Result<(Enumerated<Cell>, ValueIterationResult)> {
    let enumerated = enumerate_mdp(config, gamma, DEFAULT_STATE_CAP)?;
    let solution = value_iterate(&enumerated.mdp, DEFAULT_TOLERANCE, DEFAULT_ITERATION_CAP)?;
    Ok((enumerated, solution))
}

pub fn export(name: &str, gamma: f64, reward: GridReward, path: &Path) -> Result<ValueIterationResult> {
    let mut config = parse_gridnav_name(name)?;
    config.reward = reward;
    let (enumerated, solution) = solve_gridnav(&config, gamma)?;
    output::write_gridnav_q(path, &enumerated, &solution)?;
    Ok(solution)
}
