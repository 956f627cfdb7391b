//! Curriculum vs flat comparison on a shared sample axis.

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::error::{HarnessError, Result};
use crate::run::RunReport;

pub const ALIGNED_POINTS: usize = 50;
/// A run whose episodes almost never beat its worst episode is flagged.
pub const STALL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPoint {
    pub samples: u64,
    pub curriculum: Option<f64>,
    pub flat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub runs: usize,
    pub median_mean: Option<f64>,
    pub median_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub sample_limit: u64,
    pub points: Vec<AlignedPoint>,
    pub curriculum: EvalSummary,
    pub flat: EvalSummary,
    /// Curriculum minus flat, on the medians.
    pub delta_mean: Option<f64>,
    pub delta_max: Option<f64>,
    /// `"curriculum seed 3"` style labels of stalled runs.
    pub stalled: Vec<String>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Last running average recorded at or before `samples`.
pub fn value_at(curve: &[(u64, f64)], samples: u64) -> Option<f64> {
    curve.iter().take_while(|(s, _)| *s <= samples).last().map(|(_, v)| *v)
}

/// True when fewer than [`STALL_FRACTION`] of the episodes beat the worst one.
pub fn is_stalled(run: &RunReport) -> bool {
    let rewards: Vec<f64> = run
        .report
        .subtasks
        .iter()
        .flat_map(|s| s.curve.iter().map(|p| p.episode_reward))
        .collect();
    let Some(min) = rewards.iter().copied().reduce(f64::min) else {
        return true;
    };
    let above = rewards.iter().filter(|r| **r > min).count();
    (above as f64) < STALL_FRACTION * rewards.len() as f64
}

fn summarize(runs: &[RunReport]) -> EvalSummary {
    let means: Vec<f64> = runs.iter().filter_map(|r| r.eval.as_ref().map(|e| e.mean)).collect();
    let maxes: Vec<f64> = runs.iter().filter_map(|r| r.eval.as_ref().map(|e| e.max)).collect();
    EvalSummary {
        runs: runs.len(),
        median_mean: median(&means),
        median_max: median(&maxes),
    }
}

fn median_curve_at(runs: &[RunReport], samples: u64) -> Option<f64> {
    let values: Vec<f64> = runs.iter().filter_map(|r| value_at(&r.curve(), samples)).collect();
    median(&values)
}

pub fn compare(curriculum: &[RunReport], flat: &[RunReport]) -> Result<Comparison> {
    let first = curriculum
        .first()
        .or(flat.first())
        .ok_or_else(|| HarnessError::Config("nothing to compare".into()))?;
    let all = curriculum.iter().chain(flat);
    for r in all.clone() {
        if r.task != first.task {
            return Err(HarnessError::Mismatch(format!("task {:?} vs {:?}", r.task, first.task)));
        }
        if r.report.sample_limit != first.report.sample_limit {
            return Err(HarnessError::Mismatch(format!(
                "sample budget {} vs {}",
                r.report.sample_limit, first.report.sample_limit
            )));
        }
    }
    if curriculum.iter().any(|r| r.mode != Mode::Curriculum) || flat.iter().any(|r| r.mode != Mode::Flat) {
        return Err(HarnessError::Mismatch("run mode does not match its side of the comparison".into()));
    }

    let limit = first.report.sample_limit;
    let points = (1..=ALIGNED_POINTS as u64)
        .map(|k| {
            let samples = limit * k / ALIGNED_POINTS as u64;
            AlignedPoint {
                samples,
                curriculum: median_curve_at(curriculum, samples),
                flat: median_curve_at(flat, samples),
            }
        })
        .collect();
    let (c, f) = (summarize(curriculum), summarize(flat));
    let delta = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    let label = |side: &str, r: &RunReport| format!("{side} seed {}", r.seed);
    let stalled = curriculum
        .iter()
        .filter(|r| is_stalled(r))
        .map(|r| label("curriculum", r))
        .chain(flat.iter().filter(|r| is_stalled(r)).map(|r| label("flat", r)))
        .collect();
    Ok(Comparison {
        sample_limit: limit,
        points,
        delta_mean: delta(c.median_mean, f.median_mean),
        delta_max: delta(c.median_max, f.median_max),
        curriculum: c,
        flat: f,
        stalled,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

/// Fixed-width text table for the terminal.
pub fn render(c: &Comparison) -> String {
    let mut out = format!("{:>12} {:>12} {:>12}\n", "samples", "curriculum", "flat");
    for p in &c.points {
        out += &format!("{:>12} {:>12} {:>12}\n", p.samples, fmt_opt(p.curriculum), fmt_opt(p.flat));
    }
    out += &format!(
        "eval median mean: curriculum {} flat {} delta {}\n",
        fmt_opt(c.curriculum.median_mean),
        fmt_opt(c.flat.median_mean),
        fmt_opt(c.delta_mean)
    );
    out += &format!(
        "eval median max:  curriculum {} flat {} delta {}\n",
        fmt_opt(c.curriculum.median_max),
        fmt_opt(c.flat.median_max),
        fmt_opt(c.delta_max)
    );
    for s in &c.stalled {
        out += &format!("stalled: {s}\n");
    }
    out
}
