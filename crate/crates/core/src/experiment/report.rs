use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentOutput, ExperimentReport, SweepTable, TrialRecord};
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";

fn jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub(super) fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write(path, &jsonl(records)?)
}

pub(super) fn append_record(path: &Path, r: &TrialRecord) -> Result<()> {
    let mut line = serde_json::to_vec(r)?;
    line.push(b'\n');
    fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| f.write_all(&line))
        .map_err(|e| Error::io(path, e))
}

pub(super) fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn summary_csv(out: &ExperimentOutput, path: &Path) -> Result<Vec<u8>> {
    let keys: BTreeSet<&str> = out
        .trials
        .iter()
        .flat_map(|r| r.trial.theta.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["seed", "trial_index", "value", "failed", "wall_time_s"];
    header.extend(keys.iter().copied());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in &out.trials {
        let t = &r.trial;
        let mut row = vec![
            r.seed.to_string(),
            t.trial_index.to_string(),
            t.value.to_string(),
            t.failed.to_string(),
            t.wall_time_s.to_string(),
        ];
        row.extend(keys.iter().map(|k| t.theta.get(*k).map(f64::to_string).unwrap_or_default()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Writes `report.json`, `trials.jsonl`, `rounds.jsonl` and `summary.csv`
/// (one row per trial) into `dir`.
pub fn emit_report(out: &ExperimentOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut report = serde_json::to_vec_pretty(&out.report)?;
    report.push(b'\n');
    write(&dir.join(REPORT_FILE), &report)?;
    write(&dir.join(TRIALS_FILE), &jsonl(&out.trials)?)?;
    write(&dir.join(ROUNDS_FILE), &jsonl(&out.rounds)?)?;
    let p = dir.join(SUMMARY_FILE);
    let csv = summary_csv(out, &p)?;
    write(&p, &csv)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_sweep_csv(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "variable",
        "value",
        "mode",
        "mean_best_value",
        "mean_test_accuracy",
        "std_test_accuracy",
        "trial_count",
        "tuning_wall_time_s",
    ])
    .map_err(|e| csv_err(path, e))?;
    let var = serde_json::to_value(table.variable)?;
    let var = var.as_str().unwrap_or_default().to_string();
    for r in &table.rows {
        w.write_record([
            var.clone(),
            r.value.to_string(),
            r.mode.name().to_string(),
            r.mean_best_value.to_string(),
            r.mean_test_accuracy.to_string(),
            r.std_test_accuracy.to_string(),
            r.trial_count.to_string(),
            r.tuning_wall_time_s.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write(path, &bytes)
}
