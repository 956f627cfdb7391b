//! Human-designed subtask decompositions.
//!
//! CollectMineralsAndGas (CMAG):
//! `[CMAG, BuildRefinery, CollectGasWithRefineries, BuildRefineryAndCollectGas, CMAG]`
//! with thresholds `[300, 5, 5, 5, 500]`.
//!
//! BuildMarines (BM):
//! `[BuildSupplyDepots, BuildBarracks, BuildMarinesWithBarracks, BM]`
//! with thresholds `[7, 7, 7, 2]`.
//!
//! A subtask that continues from its predecessor starts from the state that
//! predecessor's subgoal guarantees (see [`chain_initial_condition`]); the
//! combined stages restart from the pristine template.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::gridnav::GridNavConfig;
use super::minibuild::{
    validate_template, MiniBuildConfig, MiniBuildState, RewardMode, BM_HORIZON, CMAG_HORIZON,
    MAX_REFINERIES,
};
use super::EnvConfig;
use crate::error::{Error, Result};

pub const CMAG_THRESHOLDS: [f64; 5] = [300.0, 5.0, 5.0, 5.0, 500.0];
pub const BM_THRESHOLDS: [f64; 4] = [7.0, 7.0, 7.0, 2.0];

/// Minerals granted after a completed mineral-collection subgoal
/// (two refineries' worth).
pub const COLLECTED_MINERALS: u32 = 150;
/// Minerals granted after the depot subgoal (two barracks' worth).
pub const DEPOT_STAGE_MINERALS: u32 = 300;
/// Minerals granted after the barracks subgoal.
pub const BARRACKS_STAGE_MINERALS: u32 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cmag,
    Bm,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Cmag => "CMAG",
            Task::Bm => "BM",
        }
    }

    pub fn stages(self) -> usize {
        match self {
            Task::Cmag => 5,
            Task::Bm => 4,
        }
    }

    pub fn horizon(self) -> u32 {
        match self {
            Task::Cmag => CMAG_HORIZON,
            Task::Bm => BM_HORIZON,
        }
    }

    pub fn default_thresholds(self) -> Vec<f64> {
        match self {
            Task::Cmag => CMAG_THRESHOLDS.to_vec(),
            Task::Bm => BM_THRESHOLDS.to_vec(),
        }
    }

    /// The original minigame: the last stage of the decomposition.
    pub fn final_subtask(self) -> SubtaskSpec {
        subtask_factory(self, self.stages() - 1).expect("last stage exists")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtaskSpec {
    pub name: String,
    pub env: EnvConfig,
    pub threshold: f64,
}

impl SubtaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::NonFinite("subtask threshold"));
        }
        self.env.validate()
    }

    pub fn reward_mode(&self) -> Option<RewardMode> {
        match &self.env {
            EnvConfig::MiniBuild(c) => Some(c.reward_mode),
            EnvConfig::GridNav(_) => None,
        }
    }

    pub fn initial_condition(&self) -> Option<&MiniBuildState> {
        match &self.env {
            EnvConfig::MiniBuild(c) => Some(&c.initial),
            EnvConfig::GridNav(_) => None,
        }
    }
}

fn minibuild(name: &str, task: Task, mode: RewardMode, initial: MiniBuildState, threshold: f64) -> SubtaskSpec {
    SubtaskSpec {
        name: name.to_string(),
        env: EnvConfig::MiniBuild(MiniBuildConfig::new(task.horizon(), mode, initial)),
        threshold,
    }
}

/// Stage `stage` of `task`'s decomposition, with its reward mode, initial
/// template and default threshold.
pub fn subtask_factory(task: Task, stage: usize) -> Result<SubtaskSpec> {
    if stage >= task.stages() {
        return Err(Error::StageOutOfRange {
            task: task.name(),
            stage,
            stages: task.stages(),
        });
    }
    let pristine = MiniBuildState::pristine();
    let threshold = task.default_thresholds()[stage];
    let spec = match (task, stage) {
        (Task::Cmag, 0) => minibuild("CMAG", task, RewardMode::CollectAll, pristine, threshold),
        (Task::Cmag, 1) => {
            let prev = subtask_factory(task, 0)?;
            let init = chain_initial_condition(&prev, &pristine)?;
            minibuild("BuildRefinery", task, RewardMode::RefineryBuilt, init, threshold)
        }
        (Task::Cmag, 2) => {
            let prev = subtask_factory(task, 1)?;
            let init = chain_initial_condition(&prev, prev.initial_condition().expect("minibuild"))?;
            minibuild("CollectGasWithRefineries", task, RewardMode::GasOnly, init, threshold)
        }
        (Task::Cmag, 3) => {
            // builds its own refineries: continues from collected minerals only
            let init = chain_initial_condition(&subtask_factory(task, 0)?, &pristine)?;
            minibuild("BuildRefineryAndCollectGas", task, RewardMode::GasAndRefinery, init, threshold)
        }
        (Task::Cmag, _) => minibuild("CMAG", task, RewardMode::CollectAll, pristine, threshold),
        (Task::Bm, 0) => minibuild("BuildSupplyDepots", task, RewardMode::DepotBuilt, pristine, threshold),
        (Task::Bm, 1) => {
            let prev = subtask_factory(task, 0)?;
            let init = chain_initial_condition(&prev, &pristine)?;
            minibuild("BuildBarracks", task, RewardMode::BarracksBuilt, init, threshold)
        }
        (Task::Bm, 2) => {
            let prev = subtask_factory(task, 1)?;
            let init = chain_initial_condition(&prev, prev.initial_condition().expect("minibuild"))?;
            minibuild("BuildMarinesWithBarracks", task, RewardMode::MarineTrained, init, threshold)
        }
        (Task::Bm, _) => minibuild("BM", task, RewardMode::MarineTrained, pristine, threshold),
    };
    Ok(spec)
}

/// The full ordered decomposition of `task`.
pub fn decomposition(task: Task) -> Vec<SubtaskSpec> {
    (0..task.stages())
        .map(|i| subtask_factory(task, i).expect("stage in range"))
        .collect()
}

/// Template for the subtask following `prev`, built from the `achieved`
/// state: the episode clock and bookkeeping counters are reset, and the
/// structures/resources that `prev`'s subgoal guarantees are granted.
/// Idempotent: chaining its own output again changes nothing.
pub fn chain_initial_condition(prev: &SubtaskSpec, achieved: &MiniBuildState) -> Result<MiniBuildState> {
    let mode = prev
        .reward_mode()
        .ok_or_else(|| Error::Invalid("initial-condition chaining needs a MiniBuild subtask".into()))?;
    achieved.validate()?;
    let depot_supply = match &prev.env {
        EnvConfig::MiniBuild(c) => c.depot_supply,
        EnvConfig::GridNav(_) => unreachable!(),
    };
    let mut t = MiniBuildState {
        tick: 0,
        minerals_collected_total: 0,
        gas_collected_total: 0,
        minerals_spent_total: 0,
        gas_spent_total: 0,
        ..*achieved
    };
    let ensure_depot = |t: &mut MiniBuildState| {
        if t.depots == 0 {
            t.depots = 1;
            t.supply_cap += depot_supply;
        }
    };
    match mode {
        RewardMode::CollectAll => t.minerals = t.minerals.max(COLLECTED_MINERALS),
        RewardMode::RefineryBuilt | RewardMode::GasAndRefinery => t.refineries = MAX_REFINERIES,
        RewardMode::GasOnly | RewardMode::MarineTrained => {}
        RewardMode::DepotBuilt => {
            ensure_depot(&mut t);
            t.minerals = t.minerals.max(DEPOT_STAGE_MINERALS);
        }
        RewardMode::BarracksBuilt => {
            ensure_depot(&mut t);
            t.barracks = t.barracks.max(1);
            t.minerals = t.minerals.max(BARRACKS_STAGE_MINERALS);
        }
    }
    validate_template(&t)?;
    Ok(t)
}

/// Splits a GridNav route into legs `start -> w0 -> ... -> goal`, one subtask
/// per leg, each starting where the previous one ends. Default threshold of a
/// leg is `-2 * manhattan(leg)`.
pub fn waypoint_subtasks(config: &GridNavConfig) -> Result<Vec<SubtaskSpec>> {
    config.validate()?;
    if config.random_start || config.random_goal {
        return Err(Error::Invalid("waypoint curriculum needs a fixed start and goal".into()));
    }
    let mut stops = config.waypoints.clone();
    stops.push(config.goal);
    let mut from = config.start;
    let mut out = Vec::with_capacity(stops.len());
    for (i, to) in stops.into_iter().enumerate() {
        if to == from {
            return Err(Error::Invalid("consecutive waypoints coincide".into()));
        }
        let leg = GridNavConfig {
            start: from,
            goal: to,
            waypoints: Vec::new(),
            ..config.clone()
        };
        out.push(SubtaskSpec {
            name: alloc::format!("leg{i}"),
            env: EnvConfig::GridNav(leg),
            threshold: -2.0 * f64::from(from.manhattan(to)),
        });
        from = to;
    }
    Ok(out)
}
