//! Experiment configuration: which task, which learner, which budget, and
//! every hyperparameter, with defaults filled in at load time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subgoal_core::curriculum::{CurriculumSpec, DEFAULT_TEST_INTERVAL, DEFAULT_TEST_WINDOW};
use subgoal_core::env::{waypoint_subtasks, EnvConfig, GridNavConfig, SubtaskSpec, Task};
use subgoal_core::learn::{DqnConfig, PpoConfig, TabularConfig};

use crate::error::{HarnessError, Result};

pub const PROTOCOL_EPISODES: usize = 30;
pub const OUTPUT_ROOT_VAR: &str = "SUBGOAL_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Cmag,
    Bm,
    Gridnav,
}

impl TaskKind {
    pub fn minibuild(self) -> Option<Task> {
        match self {
            TaskKind::Cmag => Some(Task::Cmag),
            TaskKind::Bm => Some(Task::Bm),
            TaskKind::Gridnav => None,
        }
    }

    /// Budget used when a config gives no `sample_limit`.
    pub fn default_sample_limit(self) -> u64 {
        match self {
            TaskKind::Cmag => 10_000_000,
            TaskKind::Bm => 3_400_000,
            TaskKind::Gridnav => 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Curriculum,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Dqn,
    #[default]
    Ppo,
    Tabular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSettings {
    /// One per subtask; the task's defaults when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    pub test_window: usize,
    pub test_interval: usize,
    pub fresh_heads: bool,
}

impl Default for CurriculumSettings {
    fn default() -> Self {
        CurriculumSettings {
            thresholds: None,
            test_window: DEFAULT_TEST_WINDOW,
            test_interval: DEFAULT_TEST_INTERVAL,
            fresh_heads: false,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval_episodes() -> usize {
    PROTOCOL_EPISODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub learner: LearnerKind,
    /// Required: runs never seed from the clock.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_limit: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub curriculum: CurriculumSettings,
    /// Grid for the `gridnav` task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gridnav: Option<GridNavConfig>,
    #[serde(default)]
    pub dqn: DqnConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub tabular: TabularConfig,
}

impl ExperimentConfig {
    /// Defaults for `task`, already resolved.
    pub fn defaults(task: TaskKind, mode: Mode, learner: LearnerKind, seed: u64) -> Result<Self> {
        let mut c = ExperimentConfig {
            task,
            mode,
            learner,
            seed,
            sample_limit: None,
            output_dir: default_output_dir(),
            eval_episodes: PROTOCOL_EPISODES,
            curriculum: CurriculumSettings::default(),
            gridnav: None,
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            tabular: TabularConfig::default(),
        };
        c.resolve()?;
        Ok(c)
    }

    /// Fills task-dependent defaults and validates. Idempotent.
    pub fn resolve(&mut self) -> Result<()> {
        if self.task == TaskKind::Gridnav && self.gridnav.is_none() {
            self.gridnav = Some(GridNavConfig::square(5, 50));
        }
        if self.task != TaskKind::Gridnav && self.gridnav.is_some() {
            return Err(HarnessError::Config("`gridnav` is only valid for the gridnav task".into()));
        }
        if self.sample_limit.is_none() {
            self.sample_limit = Some(self.task.default_sample_limit());
        }
        if self.curriculum.thresholds.is_none() {
            let subtasks = self.subtasks()?;
            self.curriculum.thresholds = Some(subtasks.iter().map(|s| s.threshold).collect());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let core = |r: subgoal_core::Result<()>, what: &str| {
            r.map_err(|e| HarnessError::Config(format!("{what}: {e}")))
        };
        core(self.dqn.validate(), "dqn")?;
        core(self.ppo.validate(), "ppo")?;
        core(self.tabular.validate(), "tabular")?;
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be at least 1".into());
        }
        if self.learner == LearnerKind::Tabular && self.task != TaskKind::Gridnav {
            return bad("the tabular learner is only available for the gridnav task".into());
        }
        if let Some(g) = &self.gridnav {
            core(g.validate(), "gridnav")?;
        }
        let subtasks = self.subtasks()?;
        if let Some(t) = &self.curriculum.thresholds {
            if t.len() != subtasks.len() {
                return bad(format!("{} thresholds for {} subtasks", t.len(), subtasks.len()));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return bad("thresholds must be finite".into());
            }
        }
        if self.curriculum.test_window == 0 || self.curriculum.test_interval == 0 {
            return bad("test_window and test_interval must be at least 1".into());
        }
        if let Some(n) = self.sample_limit {
            if self.mode == Mode::Curriculum && n < subtasks.len() as u64 {
                return bad(format!("sample_limit {n} is below the {} subtasks", subtasks.len()));
            }
        }
        Ok(())
    }

    pub fn sample_limit(&self) -> u64 {
        self.sample_limit.unwrap_or_else(|| self.task.default_sample_limit())
    }

    fn grid(&self) -> Result<&GridNavConfig> {
        self.gridnav
            .as_ref()
            .ok_or_else(|| HarnessError::Config("gridnav task without a grid".into()))
    }

    /// The ordered decomposition used in curriculum mode.
    pub fn subtasks(&self) -> Result<Vec<SubtaskSpec>> {
        match self.task.minibuild() {
            Some(task) => Ok(subgoal_core::env::decomposition(task)),
            None => {
                let grid = self.grid()?;
                if self.mode == Mode::Flat {
                    return Ok(vec![self.flat_target()?]);
                }
                waypoint_subtasks(grid).map_err(|e| HarnessError::Config(format!("gridnav: {e}")))
            }
        }
    }

    /// The task trained on in flat mode and used for evaluation.
    pub fn flat_target(&self) -> Result<SubtaskSpec> {
        match self.task.minibuild() {
            Some(task) => Ok(task.final_subtask()),
            None => {
                let grid = self.grid()?;
                Ok(SubtaskSpec {
                    name: "gridnav".into(),
                    env: EnvConfig::GridNav(grid.clone()),
                    threshold: 0.0,
                })
            }
        }
    }

    pub fn curriculum_spec(&self) -> Result<CurriculumSpec> {
        let subtasks = self.subtasks()?;
        let thresholds = match &self.curriculum.thresholds {
            Some(t) => t.clone(),
            None => subtasks.iter().map(|s| s.threshold).collect(),
        };
        Ok(CurriculumSpec {
            subtasks,
            thresholds,
            sample_limit: self.sample_limit(),
            test_window: self.curriculum.test_window,
            test_interval: self.curriculum.test_interval,
            fresh_heads: self.curriculum.fresh_heads,
        })
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out where the run is
    /// written.
    pub fn hash(&self) -> String {
        let mut identity = self.clone();
        identity.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&identity).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses `text` (read from `path`) and resolves defaults.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = serde_json::from_str(text).map_err(|e| parse_error(e, text, path))?;
    config.resolve()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, path)
}

pub fn save_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    crate::output::write_text(path, &config.to_json())
}

pub(crate) fn parse_error(e: serde_json::Error, text: &str, path: &Path) -> HarnessError {
    let line = e.line();
    let context = text
        .lines()
        .nth(line.saturating_sub(1))
        .unwrap_or("")
        .trim_end()
        .to_string();
    HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        column: e.column(),
        message: e.to_string(),
        context,
    }
}

/// `path` under the output root from the environment, when one is set and
/// `path` is relative.
pub fn under_output_root(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if path.is_relative() && !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new("test.json"))
    }

    #[test]
    fn minimal_bm_gets_default_thresholds() {
        let c = parse(r#"{"task": "bm", "seed": 1}"#).unwrap();
        assert_eq!(c.curriculum.thresholds, Some(vec![7.0, 7.0, 7.0, 2.0]));
        assert_eq!(c.mode, Mode::Curriculum);
        assert_eq!(c.sample_limit, Some(3_400_000));
        assert_eq!(c.eval_episodes, 30);
    }

    #[test]
    fn cmag_thresholds() {
        let c = parse(r#"{"task": "cmag", "seed": 1}"#).unwrap();
        assert_eq!(c.curriculum.thresholds, Some(vec![300.0, 5.0, 5.0, 5.0, 500.0]));
    }

    #[test]
    fn negative_learning_rate_is_rejected() {
        let err = parse(r#"{"task": "bm", "seed": 1, "ppo": {"learning_rate": -0.1}}"#).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)), "{err}");
    }

    #[test]
    fn seed_is_required() {
        assert!(matches!(parse(r#"{"task": "bm"}"#), Err(HarnessError::Parse { .. })));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "{\n  \"task\": \"bm\",\n  \"seed\": 3,\n  \"lerning_rate\": 0.1\n}";
        match parse(text).unwrap_err() {
            HarnessError::Parse { line, context, message, .. } => {
                assert_eq!(line, 4);
                assert!(context.contains("lerning_rate"));
                assert!(message.contains("unknown field"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let c = parse(r#"{"task": "gridnav", "seed": 9, "learner": "dqn", "mode": "flat"}"#).unwrap();
        let again = parse(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = parse(r#"{"task": "bm", "seed": 1}"#).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn threshold_count_must_match() {
        assert!(parse(r#"{"task": "bm", "seed": 1, "curriculum": {"thresholds": [1, 2]}}"#).is_err());
    }

    #[test]
    fn tabular_needs_gridnav() {
        assert!(parse(r#"{"task": "bm", "seed": 1, "learner": "tabular"}"#).is_err());
        assert!(parse(r#"{"task": "gridnav", "seed": 1, "learner": "tabular"}"#).is_ok());
    }

    #[test]
    fn table_defaults() {
        let c = ExperimentConfig::defaults(TaskKind::Bm, Mode::Curriculum, LearnerKind::Ppo, 0).unwrap();
        assert_eq!(c.ppo.learning_rate, 0.0007);
        assert_eq!(c.dqn.learning_rate, 0.0007);
        assert_eq!(c.ppo.batch_size, 32);
        assert_eq!(c.dqn.batch_size, 32);
        assert_eq!(c.ppo.trajectory_length, 40);
    }
}
