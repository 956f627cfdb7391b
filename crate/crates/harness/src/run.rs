//! One training run: build the learner, run the curriculum or the flat
//! baseline, then write the report, curves, checkpoint and evaluation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subgoal_core::curriculum::{run_curriculum_with, run_flat_baseline_with, CurriculumReport};
use subgoal_core::learn::{Agent, DqnAgent, LearnStats, LearnerParams, PpoAgent, TabularAgent};
use subgoal_core::{ActionId, Experience, SeededRng, StateVec};

use crate::checkpoint::Checkpoint;
use crate::config::{save_config, ExperimentConfig, LearnerKind, Mode, TaskKind};
use crate::error::{HarnessError, Result};
use crate::evaluate::{evaluate_params, EvalReport};
use crate::output;

pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EVAL_FILE: &str = "eval.json";
pub const REPLAY_FILE: &str = "replay.jsonl";
pub const CURVES_DIR: &str = "curves";

pub enum AnyAgent {
    Dqn(DqnAgent),
    Ppo(PpoAgent),
    Tabular(TabularAgent),
}

macro_rules! delegate {
    ($self:ident, $a:ident => $e:expr) => {
        match $self {
            AnyAgent::Dqn($a) => $e,
            AnyAgent::Ppo($a) => $e,
            AnyAgent::Tabular($a) => $e,
        }
    };
}

impl Agent for AnyAgent {
    fn act(&mut self, state: &StateVec, goal: Option<&StateVec>, rng: &mut SeededRng) -> subgoal_core::Result<ActionId> {
        delegate!(self, a => a.act(state, goal, rng))
    }

    fn greedy_action(&self, state: &StateVec, goal: Option<&StateVec>) -> subgoal_core::Result<ActionId> {
        delegate!(self, a => a.greedy_action(state, goal))
    }

    fn collect_size(&self) -> usize {
        delegate!(self, a => a.collect_size())
    }

    fn learn(&mut self, experiences: &[Experience], rng: &mut SeededRng) -> subgoal_core::Result<LearnStats> {
        delegate!(self, a => a.learn(experiences, rng))
    }

    fn abandon_episode(&mut self) -> subgoal_core::Result<()> {
        delegate!(self, a => a.abandon_episode())
    }

    fn reset_parameters(&mut self, rng: &mut SeededRng) -> subgoal_core::Result<()> {
        delegate!(self, a => a.reset_parameters(rng))
    }

    fn params(&self) -> LearnerParams {
        delegate!(self, a => a.params())
    }
}

/// A fresh learner sized for the config's target environment.
pub fn make_agent(config: &ExperimentConfig, rng: &mut SeededRng) -> Result<AnyAgent> {
    let env = config.flat_target()?.env;
    let spec = env.spec();
    let (s, g, a) = (spec.state_dim, env.goal_dim(), spec.action_count);
    Ok(match config.learner {
        LearnerKind::Dqn => AnyAgent::Dqn(DqnAgent::new(s, g, a, config.dqn.clone(), rng)?),
        LearnerKind::Ppo => AnyAgent::Ppo(PpoAgent::new(s, g, a, config.ppo.clone(), rng)?),
        LearnerKind::Tabular => AnyAgent::Tabular(TabularAgent::new(s, g, a, config.tabular.clone())?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub task: TaskKind,
    pub mode: Mode,
    pub learner: LearnerKind,
    pub seed: u64,
    pub config_hash: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub report: CurriculumReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
}

impl RunReport {
    /// `(cumulative samples, running average)` for every recorded episode,
    /// across subtasks in order.
    pub fn curve(&self) -> Vec<(u64, f64)> {
        self.report
            .subtasks
            .iter()
            .flat_map(|s| s.curve.iter().map(|p| (p.cumulative_samples, p.running_average)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: RunReport,
    pub checkpoint_hash: String,
}

/// Trains per `config` and writes every artifact into `dir`. A run that
/// aborts still leaves `report.json` with the partial report.
pub fn train(config: &ExperimentConfig, dir: &Path, dump_replay: bool) -> Result<RunOutcome> {
    config.validate()?;
    let config_hash = config.hash();
    save_config(config, &dir.join(CONFIG_FILE))?;

    let mut root = SeededRng::new(config.seed);
    let mut init_rng = root.fork();
    let mut train_rng = root.fork();
    let mut eval_rng = root.fork();

    let mut agent = make_agent(config, &mut init_rng)?;
    let result = match config.mode {
        Mode::Curriculum => run_curriculum_with(&config.curriculum_spec()?, &mut agent, |s| s.env.build(), &mut train_rng),
        Mode::Flat => run_flat_baseline_with(
            &config.flat_target()?,
            &mut agent,
            config.sample_limit(),
            config.curriculum.test_window,
            config.curriculum.test_interval,
            |s| s.env.build(),
            &mut train_rng,
        ),
    };
    let mut run = RunReport {
        task: config.task,
        mode: config.mode,
        learner: config.learner,
        seed: config.seed,
        config_hash: config_hash.clone(),
        status: RunStatus::Completed,
        error: None,
        report: CurriculumReport {
            sample_limit: config.sample_limit(),
            total_samples: 0,
            test_window: config.curriculum.test_window,
            test_interval: config.curriculum.test_interval,
            subtasks: Vec::new(),
            tests: Vec::new(),
        },
        eval: None,
    };
    match result {
        Ok(report) => run.report = report,
        Err(abort) => {
            run.status = RunStatus::Aborted;
            run.error = Some(abort.cause.to_string());
            run.report = abort.partial.clone();
            output::write_json(&dir.join(REPORT_FILE), &run)?;
            output::write_curves(&dir.join(CURVES_DIR), &run.report)?;
            return Err(abort.into());
        }
    }
    output::write_curves(&dir.join(CURVES_DIR), &run.report)?;

    let eval_env = config.flat_target()?.env;
    let checkpoint = Checkpoint::new(config.task, config_hash, eval_env.clone(), agent.params());
    let checkpoint_hash = checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    let eval = evaluate_params(
        &checkpoint.params,
        &eval_env,
        config.eval_episodes,
        checkpoint_hash.clone(),
        &mut eval_rng,
    )?;
    output::write_json(&dir.join(EVAL_FILE), &eval)?;
    run.eval = Some(eval);
    output::write_json(&dir.join(REPORT_FILE), &run)?;

    if dump_replay {
        match &agent {
            AnyAgent::Dqn(d) => output::write_replay_jsonl(&dir.join(REPLAY_FILE), d.buffer())?,
            _ => {
                return Err(HarnessError::Config(
                    "--dump-replay needs a learner with a replay buffer (dqn)".into(),
                ))
            }
        }
    }
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        report: run,
        checkpoint_hash,
    })
}

pub fn load_run_report(path: &Path) -> Result<RunReport> {
    let path = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    output::read_json(&path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use subgoal_core::env::GridNavConfig;

    fn small_gridnav(learner: LearnerKind, mode: Mode) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(TaskKind::Gridnav, mode, learner, 3).unwrap();
        c.gridnav = Some(GridNavConfig::square(3, 12));
        c.sample_limit = Some(600);
        c.curriculum.thresholds = None;
        c.resolve().unwrap();
        c
    }

    #[test]
    fn tabular_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = train(&small_gridnav(LearnerKind::Tabular, Mode::Flat), dir.path(), false).unwrap();
        for f in [CONFIG_FILE, REPORT_FILE, CHECKPOINT_FILE, EVAL_FILE] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert_eq!(out.report.status, RunStatus::Completed);
        assert_eq!(out.report.report.total_samples, 600);
        let loaded = load_run_report(dir.path()).unwrap();
        assert_eq!(loaded, out.report);
        assert_eq!(loaded.eval.unwrap().checkpoint_hash, out.checkpoint_hash);
    }

    #[test]
    fn replay_dump_needs_a_buffer() {
        let dir = tempfile::tempdir().unwrap();
        let err = train(&small_gridnav(LearnerKind::Tabular, Mode::Flat), dir.path(), true).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
    }

    #[test]
    fn dqn_replay_dump_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_gridnav(LearnerKind::Dqn, Mode::Curriculum);
        c.dqn.hidden = vec![8];
        train(&c, dir.path(), true).unwrap();
        let slots = output::read_replay_jsonl(&dir.path().join(REPLAY_FILE)).unwrap();
        assert_eq!(slots.len(), 600);
        assert!(slots.windows(2).all(|w| w[0].seq + 1 == w[1].seq));
    }
}
