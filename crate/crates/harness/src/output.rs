//! File formats: pretty JSON, per-subtask curve CSVs, replay JSONL audits
//! and Q* tables.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use subgoal_core::curriculum::{CurriculumReport, CurvePoint};
use subgoal_core::env::gridnav::Cell;
use subgoal_core::oracle::{Enumerated, ValueIterationResult};
use subgoal_core::replay::{ReplayBuffer, Slot};

use crate::config::parse_error;
use crate::error::{HarnessError, Result};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    let mut body = text.to_string();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(e, &text, path))
}

/// `NN_name.csv` for subtask `index`.
pub fn curve_file_name(index: usize, name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{index:02}_{safe}.csv")
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cumulative_samples", "episode_reward", "running_average"])?;
    for p in curve {
        w.write_record([
            p.cumulative_samples.to_string(),
            p.episode_reward.to_string(),
            p.running_average.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| HarnessError::Mismatch(format!("{}: short row", path.display())))
        };
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| HarnessError::Mismatch(format!("{}: bad number {s:?}", path.display())))
        };
        out.push(CurvePoint {
            cumulative_samples: field(0)?
                .parse()
                .map_err(|_| HarnessError::Mismatch(format!("{}: bad sample count", path.display())))?,
            episode_reward: num(field(1)?)?,
            running_average: num(field(2)?)?,
        });
    }
    Ok(out)
}

/// One CSV per subtask under `dir`; returns the paths in subtask order.
pub fn write_curves(dir: &Path, report: &CurriculumReport) -> Result<Vec<PathBuf>> {
    report
        .subtasks
        .iter()
        .map(|s| {
            let path = dir.join(curve_file_name(s.index, &s.name));
            write_curve(&path, &s.curve)?;
            Ok(path)
        })
        .collect()
}

/// One JSON object per stored tuple, oldest first.
pub fn write_replay_jsonl(path: &Path, buffer: &ReplayBuffer) -> Result<()> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for slot in buffer.iter() {
        serde_json::to_writer(&mut w, slot)?;
        w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_replay_jsonl(path: &Path) -> Result<Vec<Slot>> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| parse_error(e, &line, path))?);
        }
    }
    Ok(out)
}

/// `x,y,v,q_up,q_down,q_left,q_right`, one row per cell in row-major order.
pub fn write_gridnav_q(path: &Path, enumerated: &Enumerated<Cell>, solution: &ValueIterationResult) -> Result<()> {
    ensure_parent(path)?;
    let mut rows: Vec<(Cell, usize)> = enumerated.states.iter().copied().zip(0..).collect();
    rows.sort_by_key(|(c, _)| (c.y, c.x));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "v", "q_up", "q_down", "q_left", "q_right"])?;
    for (cell, i) in rows {
        let mut record = vec![cell.x.to_string(), cell.y.to_string(), solution.v[i].to_string()];
        record.extend(solution.q[i].iter().map(|q| q.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}
