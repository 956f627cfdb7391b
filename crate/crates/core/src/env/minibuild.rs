//! MiniBuild: a deterministic, tick-based RTS economy with the prerequisite
//! structure of the CollectMineralsAndGas and BuildMarines minigames
//! (refinery before gas, depot before barracks, barracks before marines).
//!
//! Each tick the chosen action is applied if it is affordable and its
//! prerequisites hold (otherwise it does nothing), then every harvesting SCV
//! delivers income. Builds complete instantly.
//!
//! Observation layout (16 features, all in `[0, 1]`):
//!
//! | idx | feature |
//! |-----|---------|
//! | 0 | minerals, squashed `x / (x + 200)` |
//! | 1 | gas, squashed `x / (x + 200)` |
//! | 2 | idle SCVs / 16 |
//! | 3 | mineral SCVs / 16 |
//! | 4 | gas SCVs / 6 |
//! | 5 | refineries / 2 |
//! | 6 | depots, squashed `x / (x + 2)` |
//! | 7 | barracks, squashed `x / (x + 2)` |
//! | 8 | marines, squashed `x / (x + 8)` |
//! | 9 | free supply, squashed `x / (x + 4)` |
//! | 10 | supply cap, squashed `x / (x + 30)` |
//! | 11 | tick / horizon |
//! | 12..16 | affordability flags: refinery, depot, barracks, marine |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, MdpSpec, StateVec, StepResult};
use crate::rng::SeededRng;

pub const ACTION_COUNT: usize = 8;
pub const STATE_DIM: usize = 16;
pub const MAX_REFINERIES: u32 = 2;
pub const GAS_SLOTS_PER_REFINERY: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuildAction {
    NoOp,
    AssignToMinerals,
    AssignToGas,
    BuildScv,
    BuildRefinery,
    BuildDepot,
    BuildBarracks,
    TrainMarine,
}

impl BuildAction {
    pub const ALL: [BuildAction; ACTION_COUNT] = [
        BuildAction::NoOp,
        BuildAction::AssignToMinerals,
        BuildAction::AssignToGas,
        BuildAction::BuildScv,
        BuildAction::BuildRefinery,
        BuildAction::BuildDepot,
        BuildAction::BuildBarracks,
        BuildAction::TrainMarine,
    ];

    pub fn from_id(action: ActionId) -> Result<Self> {
        Self::ALL
            .get(action.0)
            .copied()
            .ok_or(Error::InvalidAction {
                index: action.0,
                action_count: ACTION_COUNT,
            })
    }

    pub fn id(self) -> ActionId {
        ActionId(self as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub scv: u32,
    pub refinery: u32,
    pub depot: u32,
    pub barracks: u32,
    pub marine: u32,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            scv: 50,
            refinery: 75,
            depot: 100,
            barracks: 150,
            marine: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldTable {
    pub minerals_per_scv: u32,
    pub gas_per_scv: u32,
    /// Mineral SCVs beyond this count harvest nothing.
    pub mineral_saturation: u32,
}

impl Default for YieldTable {
    fn default() -> Self {
        YieldTable {
            minerals_per_scv: 5,
            gas_per_scv: 4,
            mineral_saturation: 16,
        }
    }
}

/// Which event a subtask rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardMode {
    /// Minerals plus gas harvested this tick.
    CollectAll,
    RefineryBuilt,
    /// Gas harvested this tick.
    GasOnly,
    GasAndRefinery,
    DepotBuilt,
    BarracksBuilt,
    MarineTrained,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(deny_unknown_fields, default)]
pub struct MiniBuildState {
    pub minerals: u32,
    pub gas: u32,
    pub scv_idle: u32,
    pub scv_minerals: u32,
    pub scv_gas: u32,
    pub refineries: u32,
    pub depots: u32,
    pub barracks: u32,
    pub marines: u32,
    pub supply_used: u32,
    pub supply_cap: u32,
    pub tick: u32,
    pub minerals_collected_total: u32,
    pub gas_collected_total: u32,
    pub minerals_spent_total: u32,
    pub gas_spent_total: u32,
}

impl MiniBuildState {
    /// Twelve idle SCVs, supply 12/15, no resources or buildings.
    pub fn pristine() -> Self {
        MiniBuildState {
            scv_idle: 12,
            supply_used: 12,
            supply_cap: 15,
            ..Default::default()
        }
    }

    pub fn scvs(&self) -> u32 {
        self.scv_idle + self.scv_minerals + self.scv_gas
    }

    pub fn validate(&self) -> Result<()> {
        if self.supply_used > self.supply_cap {
            return Err(Error::Invalid(alloc::format!(
                "supply_used {} exceeds supply_cap {}",
                self.supply_used,
                self.supply_cap
            )));
        }
        if self.supply_used != self.scvs() + self.marines {
            return Err(Error::Invalid(alloc::format!(
                "supply_used {} does not match {} SCVs + {} marines",
                self.supply_used,
                self.scvs(),
                self.marines
            )));
        }
        if self.refineries > MAX_REFINERIES {
            return Err(Error::Invalid("more than two refineries".into()));
        }
        if self.scv_gas > GAS_SLOTS_PER_REFINERY * self.refineries {
            return Err(Error::Invalid("more gas SCVs than refinery slots".into()));
        }
        if self.barracks > 0 && self.depots == 0 {
            return Err(Error::Invalid("barracks without a supply depot".into()));
        }
        Ok(())
    }

    /// Resource conservation relative to the episode's starting template:
    /// start + collected = current + spent, for minerals and for gas.
    pub fn check_conservation(&self, start: &MiniBuildState) -> Result<()> {
        let balance = |held: u32, collected: u32, spent: u32, s_held: u32, s_col: u32, s_spent: u32| {
            i64::from(s_held) + i64::from(collected) - i64::from(s_col)
                == i64::from(held) + i64::from(spent) - i64::from(s_spent)
        };
        if !balance(
            self.minerals,
            self.minerals_collected_total,
            self.minerals_spent_total,
            start.minerals,
            start.minerals_collected_total,
            start.minerals_spent_total,
        ) {
            return Err(Error::Invalid("mineral conservation violated".into()));
        }
        if !balance(
            self.gas,
            self.gas_collected_total,
            self.gas_spent_total,
            start.gas,
            start.gas_collected_total,
            start.gas_spent_total,
        ) {
            return Err(Error::Invalid("gas conservation violated".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiniBuildConfig {
    #[serde(default)]
    pub costs: CostTable,
    #[serde(default)]
    pub yields: YieldTable,
    #[serde(default = "default_depot_supply")]
    pub depot_supply: u32,
    /// Episode length in ticks.
    pub horizon: u32,
    pub reward_mode: RewardMode,
    pub initial: MiniBuildState,
    /// Reward per refinery, depot or barracks in the builder modes.
    #[serde(default = "default_build_reward")]
    pub build_reward: f64,
    #[serde(default = "default_marine_reward")]
    pub marine_reward: f64,
}

fn default_depot_supply() -> u32 {
    8
}
fn default_build_reward() -> f64 {
    5.0
}
fn default_marine_reward() -> f64 {
    1.0
}

pub const CMAG_HORIZON: u32 = 240;
pub const BM_HORIZON: u32 = 120;

impl MiniBuildConfig {
    pub fn new(horizon: u32, reward_mode: RewardMode, initial: MiniBuildState) -> Self {
        MiniBuildConfig {
            costs: CostTable::default(),
            yields: YieldTable::default(),
            depot_supply: default_depot_supply(),
            horizon,
            reward_mode,
            initial,
            build_reward: default_build_reward(),
            marine_reward: default_marine_reward(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.costs;
        if [c.scv, c.refinery, c.depot, c.barracks, c.marine].contains(&0) {
            return Err(Error::Invalid("costs must be positive".into()));
        }
        let y = &self.yields;
        if y.minerals_per_scv == 0 || y.gas_per_scv == 0 || y.mineral_saturation == 0 {
            return Err(Error::Invalid("yields must be positive".into()));
        }
        if self.depot_supply == 0 {
            return Err(Error::Invalid("depot_supply must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        if !(self.build_reward.is_finite() && self.marine_reward.is_finite()) {
            return Err(Error::NonFinite("reward scale"));
        }
        validate_template(&self.initial)
    }

    pub fn spec(&self) -> MdpSpec {
        MdpSpec {
            state_dim: STATE_DIM,
            action_count: ACTION_COUNT,
            gamma: 1.0,
            max_steps: self.horizon as usize,
        }
    }

    pub fn encode(&self, s: &MiniBuildState) -> StateVec {
        let squash = |x: u32, scale: f64| {
            let x = f64::from(x);
            x / (x + scale)
        };
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let values = alloc::vec![
            squash(s.minerals, 200.0),
            squash(s.gas, 200.0),
            f64::from(s.scv_idle) / 16.0,
            f64::from(s.scv_minerals) / 16.0,
            f64::from(s.scv_gas) / 6.0,
            f64::from(s.refineries) / 2.0,
            squash(s.depots, 2.0),
            squash(s.barracks, 2.0),
            squash(s.marines, 8.0),
            squash(s.supply_cap - s.supply_used, 4.0),
            squash(s.supply_cap, 30.0),
            f64::from(s.tick) / f64::from(self.horizon),
            flag(s.minerals >= self.costs.refinery),
            flag(s.minerals >= self.costs.depot),
            flag(s.minerals >= self.costs.barracks),
            flag(s.minerals >= self.costs.marine),
        ];
        StateVec::new(values).expect("encoded features are finite")
    }

    /// Pure transition: next state, reward, and whether the horizon was hit.
    pub fn transition(&self, s: &MiniBuildState, action: BuildAction) -> (MiniBuildState, f64, bool) {
        let mut n = *s;
        let costs = &self.costs;
        let mut built_refinery = false;
        let mut built_depot = false;
        let mut built_barracks = false;
        let mut trained_marine = false;

        let spend = |n: &mut MiniBuildState, cost: u32| -> bool {
            if n.minerals >= cost {
                n.minerals -= cost;
                n.minerals_spent_total += cost;
                true
            } else {
                false
            }
        };

        match action {
            BuildAction::NoOp => {}
            BuildAction::AssignToMinerals => {
                if n.scv_idle > 0 {
                    n.scv_idle -= 1;
                    n.scv_minerals += 1;
                } else if n.scv_gas > 0 {
                    n.scv_gas -= 1;
                    n.scv_minerals += 1;
                }
            }
            BuildAction::AssignToGas => {
                if n.scv_gas < GAS_SLOTS_PER_REFINERY * n.refineries {
                    if n.scv_idle > 0 {
                        n.scv_idle -= 1;
                        n.scv_gas += 1;
                    } else if n.scv_minerals > 0 {
                        n.scv_minerals -= 1;
                        n.scv_gas += 1;
                    }
                }
            }
            BuildAction::BuildScv => {
                if n.supply_used < n.supply_cap && spend(&mut n, costs.scv) {
                    n.scv_idle += 1;
                    n.supply_used += 1;
                }
            }
            BuildAction::BuildRefinery => {
                if n.refineries < MAX_REFINERIES && n.scvs() > 0 && spend(&mut n, costs.refinery) {
                    n.refineries += 1;
                    built_refinery = true;
                }
            }
            BuildAction::BuildDepot => {
                if n.scvs() > 0 && spend(&mut n, costs.depot) {
                    n.depots += 1;
                    n.supply_cap += self.depot_supply;
                    built_depot = true;
                }
            }
            BuildAction::BuildBarracks => {
                if n.depots > 0 && n.scvs() > 0 && spend(&mut n, costs.barracks) {
                    n.barracks += 1;
                    built_barracks = true;
                }
            }
            BuildAction::TrainMarine => {
                if n.barracks > 0 && n.supply_used < n.supply_cap && spend(&mut n, costs.marine) {
                    n.marines += 1;
                    n.supply_used += 1;
                    trained_marine = true;
                }
            }
        }

        let y = &self.yields;
        let mineral_income = y.minerals_per_scv * n.scv_minerals.min(y.mineral_saturation);
        let gas_income = y.gas_per_scv * n.scv_gas;
        n.minerals += mineral_income;
        n.minerals_collected_total += mineral_income;
        n.gas += gas_income;
        n.gas_collected_total += gas_income;
        n.tick += 1;

        let build = |hit: bool| if hit { self.build_reward } else { 0.0 };
        let reward = match self.reward_mode {
            RewardMode::CollectAll => f64::from(mineral_income + gas_income),
            RewardMode::RefineryBuilt => build(built_refinery),
            RewardMode::GasOnly => f64::from(gas_income),
            RewardMode::GasAndRefinery => build(built_refinery) + f64::from(gas_income),
            RewardMode::DepotBuilt => build(built_depot),
            RewardMode::BarracksBuilt => build(built_barracks),
            RewardMode::MarineTrained => {
                if trained_marine {
                    self.marine_reward
                } else {
                    0.0
                }
            }
        };
        (n, reward, n.tick >= self.horizon)
    }
}

/// Templates must satisfy every state invariant and start at tick 0.
pub fn validate_template(init: &MiniBuildState) -> Result<()> {
    init.validate()?;
    if init.tick != 0 {
        return Err(Error::Invalid("initial template must start at tick 0".into()));
    }
    Ok(())
}

/// Applies one action to `state` under `config`.
pub fn minibuild_step(
    state: &MiniBuildState,
    action: ActionId,
    config: &MiniBuildConfig,
) -> Result<(MiniBuildState, StepResult)> {
    let action = BuildAction::from_id(action)?;
    let (next, reward, truncated) = config.transition(state, action);
    let result = StepResult {
        next_state: config.encode(&next),
        reward,
        terminal: false,
        truncated,
    };
    Ok((next, result))
}

#[derive(Debug, Clone)]
pub struct MiniBuildEnv {
    config: MiniBuildConfig,
    start: MiniBuildState,
    state: MiniBuildState,
}

impl MiniBuildEnv {
    pub fn new(config: MiniBuildConfig) -> Result<Self> {
        config.validate()?;
        let start = config.initial;
        Ok(MiniBuildEnv {
            config,
            start,
            state: start,
        })
    }

    pub fn config(&self) -> &MiniBuildConfig {
        &self.config
    }

    pub fn state(&self) -> &MiniBuildState {
        &self.state
    }

    /// State the current episode started from.
    pub fn start(&self) -> &MiniBuildState {
        &self.start
    }

    /// Starts an episode from an explicit template instead of the configured one.
    pub fn reset_to(&mut self, init: &MiniBuildState) -> Result<StateVec> {
        validate_template(init)?;
        self.start = *init;
        self.state = *init;
        Ok(self.config.encode(&self.state))
    }
}

/// Validates `init`, and returns the encoded start state.
pub fn minibuild_reset(
    config: &MiniBuildConfig,
    init: &MiniBuildState,
    _rng: &mut SeededRng,
) -> Result<StateVec> {
    validate_template(init)?;
    Ok(config.encode(init))
}

impl Environment for MiniBuildEnv {
    fn spec(&self) -> MdpSpec {
        self.config.spec()
    }

    fn reset(&mut self, _rng: &mut SeededRng) -> Result<StateVec> {
        let init = self.config.initial;
        self.reset_to(&init)
    }

    fn step(&mut self, action: ActionId) -> Result<StepResult> {
        let (next, result) = minibuild_step(&self.state, action, &self.config)?;
        self.state = next;
        Ok(result)
    }
}
