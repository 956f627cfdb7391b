//! The curriculum executor driven by scripted environments whose episode
//! rewards are fixed in advance, so every advancement point is known.

use std::cell::RefCell;
use std::rc::Rc;

use proptest::prelude::*;
use subgoal_core::curriculum::{run_curriculum_with, run_flat_baseline_with, CurriculumSpec, SubtaskStatus};
use subgoal_core::env::{EnvConfig, GridNavConfig, SubtaskSpec};
use subgoal_core::learn::{Agent, LearnStats, LearnerParams, TabularQ};
use subgoal_core::{ActionId, Environment, Error, Experience, MdpSpec, Result, SeededRng, StateVec, StepResult};

/// Episodes of `horizon` steps; every step of episode `k` pays
/// `script(k) / horizon`, so episode `k` totals `script(k)`.
struct Scripted {
    horizon: usize,
    script: Rc<dyn Fn(usize) -> f64>,
    episode: usize,
    step: usize,
}

impl Environment for Scripted {
    fn spec(&self) -> MdpSpec {
        MdpSpec {
            state_dim: 1,
            action_count: 1,
            gamma: 1.0,
            max_steps: self.horizon,
        }
    }

    fn reset(&mut self, _: &mut SeededRng) -> Result<StateVec> {
        self.step = 0;
        StateVec::new(vec![0.0])
    }

    fn step(&mut self, _: ActionId) -> Result<StepResult> {
        self.step += 1;
        let reward = (self.script)(self.episode) / self.horizon as f64;
        let done = self.step == self.horizon;
        if done {
            self.episode += 1;
        }
        Ok(StepResult {
            next_state: StateVec::new(vec![self.step as f64])?,
            reward,
            terminal: done,
            truncated: false,
        })
    }
}

/// Learner that records what it is given and can be told to fail.
struct Stub {
    collect: usize,
    seen: Rc<RefCell<Vec<usize>>>,
    fail_after: Option<usize>,
    resets: usize,
}

impl Stub {
    fn new(collect: usize) -> Self {
        Stub {
            collect,
            seen: Rc::default(),
            fail_after: None,
            resets: 0,
        }
    }
}

impl Agent for Stub {
    fn act(&mut self, _: &StateVec, _: Option<&StateVec>, _: &mut SeededRng) -> Result<ActionId> {
        Ok(ActionId(0))
    }
    fn greedy_action(&self, _: &StateVec, _: Option<&StateVec>) -> Result<ActionId> {
        Ok(ActionId(0))
    }
    fn collect_size(&self) -> usize {
        self.collect
    }
    fn learn(&mut self, e: &[Experience], _: &mut SeededRng) -> Result<LearnStats> {
        self.seen.borrow_mut().push(e.len());
        let total: usize = self.seen.borrow().iter().sum();
        if self.fail_after.is_some_and(|f| total > f) {
            return Err(Error::Numeric("scripted failure".into()));
        }
        Ok(LearnStats::default())
    }
    fn reset_parameters(&mut self, _: &mut SeededRng) -> Result<()> {
        self.resets += 1;
        Ok(())
    }
    fn params(&self) -> LearnerParams {
        LearnerParams::Tabular(TabularQ::new(1, 0, 1).unwrap())
    }
}

fn dummy_subtask(name: &str) -> SubtaskSpec {
    SubtaskSpec {
        name: name.into(),
        env: EnvConfig::GridNav(GridNavConfig::square(2, 1)),
        threshold: 0.0,
    }
}

fn spec(thresholds: &[f64], n: u64, window: usize, interval: usize) -> CurriculumSpec {
    CurriculumSpec {
        subtasks: (0..thresholds.len()).map(|i| dummy_subtask(&format!("s{i}"))).collect(),
        thresholds: thresholds.to_vec(),
        sample_limit: n,
        test_window: window,
        test_interval: interval,
        fresh_heads: false,
    }
}

/// `scripts[i]` drives subtask `i`.
fn envs(horizon: usize, scripts: Vec<Rc<dyn Fn(usize) -> f64>>) -> impl FnMut(&SubtaskSpec) -> Result<Scripted> {
    let mut next = 0;
    move |_| {
        let script = scripts[next].clone();
        next += 1;
        Ok(Scripted {
            horizon,
            script,
            episode: 0,
            step: 0,
        })
    }
}

fn constant(v: f64) -> Rc<dyn Fn(usize) -> f64> {
    Rc::new(move |_| v)
}

#[test]
fn trivially_met_threshold_advances_at_first_test() {
    let spec = spec(&[-1e9], 10_000, 10, 25);
    let mut agent = Stub::new(64);
    let report = run_curriculum_with(&spec, &mut agent, envs(1, vec![constant(0.0)]), &mut SeededRng::new(0)).unwrap();
    let s = &report.subtasks[0];
    assert_eq!(s.status, SubtaskStatus::ThresholdMet);
    assert!(s.samples_used <= 25);
    assert_eq!(report.tests.len(), 1);
}

#[test]
fn per_subtask_cap_is_floor_n_over_m() {
    let spec = spec(&[1e9, 1e9], 101, 10, 25);
    assert_eq!(spec.per_subtask_cap(), 50);
    let mut agent = Stub::new(7);
    let report = run_curriculum_with(
        &spec,
        &mut agent,
        envs(3, vec![constant(0.0), constant(0.0)]),
        &mut SeededRng::new(0),
    )
    .unwrap();
    assert!(report.subtasks.iter().all(|s| s.samples_used == 50 && s.status == SubtaskStatus::BudgetExhausted));
    assert_eq!(report.total_samples, 100);
    assert_eq!(agent.seen.borrow().iter().sum::<usize>(), 100);
}

#[test]
fn advances_exactly_when_the_average_crosses() {
    // episode rewards 0, 1, 2, ...; window 5, tests every 10 episodes.
    // At test k (after 10k episodes) the average is 10k - 3; threshold 36.5
    // is first met at k = 4 (average 37).
    let spec = spec(&[36.5], 1_000_000, 5, 10);
    let mut agent = Stub::new(1000);
    let report = run_curriculum_with(
        &spec,
        &mut agent,
        envs(2, vec![Rc::new(|k| k as f64)]),
        &mut SeededRng::new(0),
    )
    .unwrap();
    let averages: Vec<f64> = report.tests.iter().map(|t| t.running_average).collect();
    assert_eq!(averages, vec![7.0, 17.0, 27.0, 37.0]);
    assert_eq!(report.tests.iter().map(|t| t.passed).collect::<Vec<_>>(), vec![false, false, false, true]);
    let s = &report.subtasks[0];
    assert_eq!(s.status, SubtaskStatus::ThresholdMet);
    assert_eq!(s.episodes, 40);
    assert_eq!(s.samples_used, 80);
}

#[test]
fn threshold_equal_to_average_passes() {
    let spec = spec(&[7.0], 10_000, 10, 25);
    let report = run_curriculum_with(
        &spec,
        &mut Stub::new(5),
        envs(4, vec![constant(7.0)]),
        &mut SeededRng::new(0),
    )
    .unwrap();
    assert_eq!(report.subtasks[0].status, SubtaskStatus::ThresholdMet);
    assert_eq!(report.subtasks[0].samples_used, 100);
}

#[test]
fn mixed_outcomes_are_logged_per_subtask() {
    let spec = spec(&[5.0, 5.0, 5.0], 3000, 10, 25);
    let report = run_curriculum_with(
        &spec,
        &mut Stub::new(16),
        envs(2, vec![constant(6.0), constant(4.0), constant(9.0)]),
        &mut SeededRng::new(0),
    )
    .unwrap();
    let statuses: Vec<_> = report.subtasks.iter().map(|s| s.status).collect();
    assert_eq!(
        statuses,
        vec![SubtaskStatus::ThresholdMet, SubtaskStatus::BudgetExhausted, SubtaskStatus::ThresholdMet]
    );
    assert_eq!(report.subtasks[1].samples_used, 1000);
    assert_eq!(report.subtasks.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    for t in &report.tests {
        assert_eq!(t.passed, t.running_average >= spec.thresholds[t.subtask]);
    }
}

#[test]
fn fresh_heads_reset_between_subtasks() {
    let mut spec = spec(&[-1.0, -1.0, -1.0], 300, 1, 1);
    spec.fresh_heads = true;
    let mut agent = Stub::new(4);
    run_curriculum_with(
        &spec,
        &mut agent,
        envs(1, vec![constant(0.0), constant(0.0), constant(0.0)]),
        &mut SeededRng::new(0),
    )
    .unwrap();
    assert_eq!(agent.resets, 2);
}

#[test]
fn learner_failure_returns_partial_report() {
    let spec = spec(&[1e9, 1e9], 200, 10, 25);
    let mut agent = Stub::new(10);
    agent.fail_after = Some(130);
    let err = run_curriculum_with(
        &spec,
        &mut agent,
        envs(5, vec![constant(0.0), constant(0.0)]),
        &mut SeededRng::new(0),
    )
    .unwrap_err();
    assert!(matches!(err.cause, Error::Numeric(_)));
    assert_eq!(err.partial.subtasks.len(), 2);
    assert_eq!(err.partial.total_samples, 140);
}

#[test]
fn invalid_spec_is_rejected() {
    let mut s = spec(&[1.0, 2.0], 1, 10, 25);
    assert!(run_curriculum_with(&s, &mut Stub::new(1), envs(1, vec![]), &mut SeededRng::new(0)).is_err());
    s.sample_limit = 10;
    s.thresholds.pop();
    assert!(run_curriculum_with(&s, &mut Stub::new(1), envs(1, vec![]), &mut SeededRng::new(0)).is_err());
}

#[test]
fn flat_baseline_never_advances() {
    let target = dummy_subtask("final");
    let report = run_flat_baseline_with(
        &target,
        &mut Stub::new(32),
        1000,
        10,
        25,
        envs(4, vec![constant(1e6)]),
        &mut SeededRng::new(0),
    )
    .unwrap();
    assert_eq!(report.subtasks.len(), 1);
    assert_eq!(report.subtasks[0].samples_used, 1000);
    assert_eq!(report.subtasks[0].status, SubtaskStatus::BudgetExhausted);
    assert!(report.tests.iter().all(|t| !t.passed));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn budgets_hold_for_any_script(
        m in 1usize..5,
        extra in 0u64..600,
        collect in 1usize..50,
        horizon in 1usize..9,
        window in 1usize..6,
        interval in 1usize..8,
        levels in prop::collection::vec(0.0f64..10.0, 5),
        thresholds in prop::collection::vec(0.0f64..10.0, 5),
    ) {
        let n = m as u64 + extra;
        let spec = spec(&thresholds[..m], n, window, interval);
        let scripts = levels[..m].iter().map(|v| constant(*v)).collect();
        let mut agent = Stub::new(collect);
        let report = run_curriculum_with(&spec, &mut agent, envs(horizon, scripts), &mut SeededRng::new(0)).unwrap();
        let cap = n / m as u64;
        prop_assert_eq!(report.subtasks.len(), m);
        prop_assert!(report.total_samples <= n);
        prop_assert_eq!(report.total_samples, report.subtasks.iter().map(|s| s.samples_used).sum::<u64>());
        prop_assert_eq!(agent.seen.borrow().iter().sum::<usize>() as u64, report.total_samples);
        for s in &report.subtasks {
            prop_assert!(s.samples_used <= cap);
            match s.status {
                SubtaskStatus::BudgetExhausted => prop_assert_eq!(s.samples_used, cap),
                SubtaskStatus::ThresholdMet => {
                    let last = report.tests.iter().rfind(|t| t.subtask == s.index).unwrap();
                    prop_assert!(last.passed && last.running_average >= thresholds[s.index]);
                }
            }
            // no test passes before the one that advanced
            let passes = report.tests.iter().filter(|t| t.subtask == s.index && t.passed).count();
            prop_assert!(passes <= 1);
        }
        let mut last_samples = 0;
        for s in &report.subtasks {
            for p in &s.curve {
                prop_assert!(p.cumulative_samples > last_samples);
                last_samples = p.cumulative_samples;
            }
        }
    }
}
