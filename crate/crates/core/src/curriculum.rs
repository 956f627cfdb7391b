//! The subtask executor: trains one learner through an ordered list of
//! subtasks, giving each at most `floor(n / m)` environment steps and moving
//! on as soon as the running average of recent episode rewards reaches the
//! subtask's threshold.
//!
//! Samples are environment steps. Tests happen every `test_interval`
//! completed episodes, after the learner update that follows them.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::env::{SubtaskSpec, Task};
use crate::error::{Error, Result};
use crate::learn::Agent;
use crate::mdp::{ActionId, Environment, Experience, StateVec};
use crate::rng::SeededRng;

/// Progress of the episode that spans successive collection calls.
#[derive(Debug, Clone, Default)]
pub struct Explorer {
    state: Option<StateVec>,
    goal: Option<StateVec>,
    reward: f64,
    steps: usize,
}

impl Explorer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Steps taken so far in the unfinished episode (0 between episodes).
    pub fn episode_steps(&self) -> usize {
        self.steps
    }

    pub fn in_episode(&self) -> bool {
        self.state.is_some()
    }
}

/// A finished episode inside a collection batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeEnd {
    /// Number of tuples of the batch up to and including the last step.
    pub steps_into_batch: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collected {
    pub experiences: Vec<Experience>,
    pub episodes: Vec<EpisodeEnd>,
}

impl Collected {
    pub fn episode_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }
}

/// Runs the learner's exploratory policy for at most `budget` steps,
/// continuing the explorer's current episode, and stops early once
/// `max_episodes` episodes have finished.
pub fn explore_collect<A, E>(
    agent: &mut A,
    env: &mut E,
    explorer: &mut Explorer,
    budget: usize,
    max_episodes: Option<usize>,
    rng: &mut SeededRng,
) -> Result<Collected>
where
    A: Agent + ?Sized,
    E: Environment + ?Sized,
{
    if budget == 0 {
        return Err(Error::Invalid("collection budget must be at least 1".into()));
    }
    let spec = env.spec();
    let mut out = Collected::default();
    while out.experiences.len() < budget && max_episodes.is_none_or(|m| out.episodes.len() < m) {
        let state = match explorer.state.take() {
            Some(s) => s,
            None => {
                let s = env.reset(rng)?;
                explorer.goal = env.goal();
                explorer.reward = 0.0;
                explorer.steps = 0;
                s
            }
        };
        let action = agent.act(&state, explorer.goal.as_ref(), rng)?;
        ActionId::checked(action.0, spec.action_count)?;
        let mut result = env.step(action)?;
        if !result.terminal && explorer.steps + 1 >= spec.max_steps {
            result.truncated = true;
        }
        explorer.steps += 1;
        explorer.reward += result.reward;
        let done = result.done();
        out.experiences.push(Experience {
            state,
            action,
            reward: result.reward,
            next_state: result.next_state.clone(),
            terminal: result.terminal,
            truncated: result.truncated,
            goal: explorer.goal.clone(),
        });
        if done {
            out.episodes.push(EpisodeEnd {
                steps_into_batch: out.experiences.len(),
                reward: explorer.reward,
            });
            explorer.steps = 0;
            explorer.reward = 0.0;
        } else {
            explorer.state = Some(result.next_state);
        }
    }
    Ok(out)
}

/// Mean of the last `window` episode rewards, or `None` before any episode.
pub fn test_running_average(rewards: &[f64], window: usize) -> Option<f64> {
    if rewards.is_empty() || window == 0 {
        return None;
    }
    let recent = &rewards[rewards.len().saturating_sub(window)..];
    Some(recent.iter().sum::<f64>() / recent.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSpec {
    pub subtasks: Vec<SubtaskSpec>,
    pub thresholds: Vec<f64>,
    /// Total environment-step budget `n`.
    pub sample_limit: u64,
    pub test_window: usize,
    pub test_interval: usize,
    /// Re-initialise the learner at the start of every subtask after the first.
    #[serde(default)]
    pub fresh_heads: bool,
}

pub const DEFAULT_TEST_WINDOW: usize = 10;
pub const DEFAULT_TEST_INTERVAL: usize = 25;

impl CurriculumSpec {
    /// The task's full decomposition with its default thresholds.
    pub fn for_task(task: Task, sample_limit: u64) -> Self {
        let subtasks = crate::env::decomposition(task);
        CurriculumSpec {
            thresholds: subtasks.iter().map(|s| s.threshold).collect(),
            subtasks,
            sample_limit,
            test_window: DEFAULT_TEST_WINDOW,
            test_interval: DEFAULT_TEST_INTERVAL,
            fresh_heads: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subtasks.is_empty() {
            return Err(Error::Invalid("curriculum needs at least one subtask".into()));
        }
        if self.thresholds.len() != self.subtasks.len() {
            return Err(Error::Invalid(alloc::format!(
                "{} thresholds for {} subtasks",
                self.thresholds.len(),
                self.subtasks.len()
            )));
        }
        if self.thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::NonFinite("thresholds"));
        }
        if self.sample_limit < self.subtasks.len() as u64 {
            return Err(Error::Invalid("sample_limit must be at least the number of subtasks".into()));
        }
        if self.test_window == 0 || self.test_interval == 0 {
            return Err(Error::Invalid("test_window and test_interval must be at least 1".into()));
        }
        for s in &self.subtasks {
            s.validate()?;
        }
        Ok(())
    }

    /// `floor(n / m)`.
    pub fn per_subtask_cap(&self) -> u64 {
        self.sample_limit / self.subtasks.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    ThresholdMet,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Steps consumed across the whole run when the episode ended.
    pub cumulative_samples: u64,
    pub episode_reward: f64,
    /// Running average over the test window, including this episode.
    pub running_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEvent {
    pub subtask: usize,
    pub cumulative_samples: u64,
    pub episodes: usize,
    pub running_average: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskReport {
    pub index: usize,
    pub name: String,
    /// `None` for the flat baseline, which never advances.
    pub threshold: Option<f64>,
    pub cap: u64,
    pub samples_used: u64,
    pub episodes: usize,
    pub status: SubtaskStatus,
    pub final_running_average: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumReport {
    pub sample_limit: u64,
    pub total_samples: u64,
    pub test_window: usize,
    pub test_interval: usize,
    pub subtasks: Vec<SubtaskReport>,
    pub tests: Vec<TestEvent>,
}

impl CurriculumReport {
    fn empty(sample_limit: u64, test_window: usize, test_interval: usize) -> Self {
        CurriculumReport {
            sample_limit,
            total_samples: 0,
            test_window,
            test_interval,
            subtasks: Vec::new(),
            tests: Vec::new(),
        }
    }
}

/// A learner or environment failure part-way through, with everything
/// recorded up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumAbort {
    pub partial: CurriculumReport,
    pub cause: Error,
}

impl core::fmt::Display for CurriculumAbort {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "run aborted after {} samples: {}", self.partial.total_samples, self.cause)
    }
}

impl core::error::Error for CurriculumAbort {}

struct Stage<'a> {
    spec: &'a SubtaskSpec,
    threshold: Option<f64>,
    cap: u64,
}

fn run_stage<A, E>(
    index: usize,
    stage: &Stage<'_>,
    env: &mut E,
    agent: &mut A,
    report: &mut CurriculumReport,
    rng: &mut SeededRng,
) -> Result<()>
where
    A: Agent + ?Sized,
    E: Environment + ?Sized,
{
    let (window, interval) = (report.test_window, report.test_interval);
    report.subtasks.push(SubtaskReport {
        index,
        name: stage.spec.name.clone(),
        threshold: stage.threshold,
        cap: stage.cap,
        samples_used: 0,
        episodes: 0,
        status: SubtaskStatus::BudgetExhausted,
        final_running_average: None,
        curve: Vec::new(),
    });
    let mut explorer = Explorer::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut since_test = 0usize;
    let mut used = 0u64;
    while used < stage.cap {
        let budget = (stage.cap - used).min(agent.collect_size().max(1) as u64) as usize;
        let collected = explore_collect(agent, env, &mut explorer, budget, Some(interval - since_test), rng)?;
        let base = report.total_samples;
        used += collected.experiences.len() as u64;
        report.total_samples += collected.experiences.len() as u64;
        let entry = report.subtasks.last_mut().expect("pushed above");
        entry.samples_used = used;
        for ep in &collected.episodes {
            rewards.push(ep.reward);
            entry.curve.push(CurvePoint {
                cumulative_samples: base + ep.steps_into_batch as u64,
                episode_reward: ep.reward,
                running_average: test_running_average(&rewards, window).expect("non-empty"),
            });
        }
        entry.episodes = rewards.len();
        entry.final_running_average = test_running_average(&rewards, window);
        since_test += collected.episodes.len();

        agent.learn(&collected.experiences, rng)?;

        if since_test >= interval {
            since_test = 0;
            let average = test_running_average(&rewards, window).expect("episodes finished");
            let passed = stage.threshold.is_some_and(|t| average >= t);
            report.tests.push(TestEvent {
                subtask: index,
                cumulative_samples: report.total_samples,
                episodes: rewards.len(),
                running_average: average,
                passed,
            });
            if passed {
                report.subtasks.last_mut().expect("pushed above").status = SubtaskStatus::ThresholdMet;
                break;
            }
        }
    }
    if explorer.in_episode() {
        agent.abandon_episode()?;
    }
    Ok(())
}

fn run_stages<A, E, F>(
    stages: &[Stage<'_>],
    fresh_heads: bool,
    mut report: CurriculumReport,
    agent: &mut A,
    make_env: &mut F,
    rng: &mut SeededRng,
) -> core::result::Result<CurriculumReport, CurriculumAbort>
where
    A: Agent + ?Sized,
    E: Environment,
    F: FnMut(&SubtaskSpec) -> Result<E>,
{
    for (i, stage) in stages.iter().enumerate() {
        let outcome = (|| {
            if fresh_heads && i > 0 {
                agent.reset_parameters(rng)?;
            }
            let mut env = make_env(stage.spec)?;
            run_stage(i, stage, &mut env, agent, &mut report, rng)
        })();
        if let Err(cause) = outcome {
            return Err(CurriculumAbort {
                partial: report,
                cause,
            });
        }
    }
    Ok(report)
}

/// Runs the curriculum with environments built by `make_env`.
pub fn run_curriculum_with<A, E, F>(
    spec: &CurriculumSpec,
    agent: &mut A,
    mut make_env: F,
    rng: &mut SeededRng,
) -> core::result::Result<CurriculumReport, CurriculumAbort>
where
    A: Agent + ?Sized,
    E: Environment,
    F: FnMut(&SubtaskSpec) -> Result<E>,
{
    let report = CurriculumReport::empty(spec.sample_limit, spec.test_window, spec.test_interval);
    if let Err(cause) = spec.validate() {
        return Err(CurriculumAbort { partial: report, cause });
    }
    let cap = spec.per_subtask_cap();
    let stages: Vec<Stage<'_>> = spec
        .subtasks
        .iter()
        .zip(&spec.thresholds)
        .map(|(s, t)| Stage {
            spec: s,
            threshold: Some(*t),
            cap,
        })
        .collect();
    run_stages(&stages, spec.fresh_heads, report, agent, &mut make_env, rng)
}

/// Runs the curriculum on the environments described by its subtasks.
pub fn run_curriculum<A: Agent + ?Sized>(
    spec: &CurriculumSpec,
    agent: &mut A,
    rng: &mut SeededRng,
) -> core::result::Result<CurriculumReport, CurriculumAbort> {
    run_curriculum_with(spec, agent, |s| s.env.build(), rng)
}

/// Trains on `target` alone for the whole budget, with the same collection,
/// update and test cadence as the curriculum but no advancement.
pub fn run_flat_baseline_with<A, E, F>(
    target: &SubtaskSpec,
    agent: &mut A,
    sample_limit: u64,
    test_window: usize,
    test_interval: usize,
    mut make_env: F,
    rng: &mut SeededRng,
) -> core::result::Result<CurriculumReport, CurriculumAbort>
where
    A: Agent + ?Sized,
    E: Environment,
    F: FnMut(&SubtaskSpec) -> Result<E>,
{
    let report = CurriculumReport::empty(sample_limit, test_window, test_interval);
    if sample_limit == 0 {
        return Ok(report);
    }
    let check = if test_window == 0 || test_interval == 0 {
        Err(Error::Invalid("test_window and test_interval must be at least 1".into()))
    } else {
        target.validate()
    };
    if let Err(cause) = check {
        return Err(CurriculumAbort { partial: report, cause });
    }
    let stages = [Stage {
        spec: target,
        threshold: None,
        cap: sample_limit,
    }];
    run_stages(&stages, false, report, agent, &mut make_env, rng)
}

pub fn run_flat_baseline<A: Agent + ?Sized>(
    task: Task,
    agent: &mut A,
    sample_limit: u64,
    rng: &mut SeededRng,
) -> core::result::Result<CurriculumReport, CurriculumAbort> {
    run_flat_baseline_with(
        &task.final_subtask(),
        agent,
        sample_limit,
        DEFAULT_TEST_WINDOW,
        DEFAULT_TEST_INTERVAL,
        |s| s.env.build(),
        rng,
    )
}
