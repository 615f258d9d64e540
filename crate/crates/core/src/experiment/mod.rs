//! Experiment orchestration: the tuning outer loop around FGNN, the baseline
//! runners, parameter sweeps and report files.
//!
//! One experiment runs independently per seed. For each seed the dataset is
//! split into client datasets, the tuner proposes hyper-parameters θ, every
//! trial runs the full FGNN protocol for `rounds` rounds and scores
//! `M(θ) = max_t M_t` (validation accuracy). The test accuracy of the round
//! that achieved the best `M_t` under the best θ is reported.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bayes::{self, BoConfig, Trial};
use crate::error::{Error, Result};
use crate::fgnn::{run_fgnn, ClientConfig, FgnnConfig, FgnnOutcome, Mode, RoundReport};
use crate::graph::synthetic::CitationConfig;
use crate::graph::{
    load_dataset, median_degree, part_by_classes, split_by_label_groups, split_by_label_ratio,
    split_degree_clients, split_label_and_degree, ClientDataset, Graph, SplitSpec,
};

pub use config::{
    client_configs, DatasetConfig, ExpMode, ExperimentConfig, FixedParams, SpaceKind, SplitKind, SweepSpec,
    SweepVar, Tuner,
};
pub use report::{emit_report, read_report, write_sweep_csv, REPORT_FILE, ROUNDS_FILE, SUMMARY_FILE, TRIALS_FILE};

/// A trial tagged with the experiment seed it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub trial: Trial,
}

/// A round of the selected run tagged with its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub round: RoundReport,
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub trials: usize,
    pub failed_trials: usize,
    pub best_trial: usize,
    /// `M(θ)` of the best trial: the highest mean validation accuracy.
    pub best_value: f64,
    pub best_round: u32,
    pub theta: BTreeMap<String, f64>,
    pub clients: Vec<ClientConfig>,
    pub hidden: usize,
    pub per_client_val: Vec<f64>,
    pub per_client_test: Vec<f64>,
    pub test_accuracy: f64,
    pub messages: usize,
    pub bytes: usize,
    pub shares: usize,
    pub tuning_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: ExpMode,
    pub protocol: Mode,
    pub tuner: Tuner,
    pub split: SplitKind,
    pub num_clients: usize,
    pub alpha: f64,
    pub rounds: usize,
    pub budget: usize,
    pub runs: Vec<SeedReport>,
    pub mean_best_value: f64,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub trial_count: usize,
    pub tuning_wall_time_s: f64,
}

/// Report plus the logs it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub trials: Vec<TrialRecord>,
    /// Rounds of the selected run of each seed.
    pub rounds: Vec<RoundRecord>,
}

/// Loads the configured dataset or generates the Cora-like graph.
pub fn load_graph(cfg: &DatasetConfig) -> Result<Graph> {
    match &cfg.path {
        Some(p) => load_dataset(p),
        None => {
            let base = CitationConfig::cora_like();
            let gen = if cfg.scale == 1.0 { base } else { base.scaled(cfg.scale) };
            gen.generate(cfg.seed)
        }
    }
}

fn part_classes(cfg: &ExperimentConfig, num_classes: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let p1 = match &cfg.part1_classes {
        Some(p) => p.clone(),
        None if num_classes == CitationConfig::CORA_CLASS_SIZES.len() => CitationConfig::CORA_PART1.to_vec(),
        None => (0..num_classes.div_ceil(2)).collect(),
    };
    if p1.iter().any(|&c| c >= num_classes) {
        return Err(Error::Config("part1_classes out of range".into()));
    }
    let p2 = (0..num_classes).filter(|c| !p1.contains(c)).collect();
    Ok((p1, p2))
}

/// Client datasets for one seed. A single client (and CM) gets the whole
/// graph with its own masks.
pub fn client_datasets(g: &Graph, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ClientDataset>> {
    if cfg.effective_clients() == 1 {
        return Ok(vec![ClientDataset::from_graph(0, g.clone())?]);
    }
    let threshold = || cfg.degree_threshold.unwrap_or_else(|| median_degree(g));
    match cfg.split {
        SplitKind::LabelRatio => {
            let (p1, p2) = part_classes(cfg, g.num_classes)?;
            let spec = SplitSpec {
                alpha: cfg.alpha,
                part1_classes: p1,
                part2_classes: p2,
                seed,
            };
            split_by_label_ratio(
                &part_by_classes(g, &spec.part1_classes)?,
                &part_by_classes(g, &spec.part2_classes)?,
                &spec,
            )
        }
        SplitKind::Degree => split_degree_clients(g, threshold(), seed),
        SplitKind::LabelDegree => {
            let (p1, p2) = part_classes(cfg, g.num_classes)?;
            split_label_and_degree(g, threshold(), &p1, &p2, seed)
        }
        SplitKind::LabelGroups => split_by_label_groups(g, cfg.num_clients, seed),
    }
}

/// FGNN configuration for one trial.
pub fn trial_config(cfg: &ExperimentConfig, theta: &BTreeMap<String, f64>, seed: u64) -> Result<FgnnConfig> {
    let (clients, hidden) = client_configs(theta, cfg.effective_clients())?;
    Ok(FgnnConfig {
        mode: cfg.mode.protocol(cfg.js),
        rounds: cfg.rounds,
        dim: hidden,
        local_epochs: cfg.local_epochs,
        optimizer: cfg.optimizer,
        seed,
        clients,
    })
}

/// `M(θ)`: the best round's server metric.
fn score(out: &FgnnOutcome) -> f64 {
    out.best_round().map_or(0.0, |r| r.global_metric)
}

fn is_numeric(e: &Error) -> bool {
    matches!(e, Error::Numeric(_) | Error::Overflow(_))
}

struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a [ClientDataset],
    seed: u64,
    best: Option<(f64, BTreeMap<String, f64>, FgnnOutcome)>,
}

impl Evaluator<'_> {
    fn run(&mut self, theta: &BTreeMap<String, f64>) -> Result<f64> {
        let fc = trial_config(self.cfg, theta, self.seed)?;
        let out = run_fgnn(self.data.to_vec(), &fc)?;
        let v = score(&out);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("metric {v}")));
        }
        if self.best.as_ref().is_none_or(|(b, _, _)| v > *b) {
            self.best = Some((v, theta.clone(), out));
        }
        Ok(v)
    }
}

fn run_seed(
    cfg: &ExperimentConfig,
    g: &Graph,
    seed: u64,
    prior: &[Trial],
    live: Option<&Path>,
) -> Result<(SeedReport, Vec<Trial>, Vec<RoundReport>)> {
    let data = client_datasets(g, cfg, seed)?;
    let space = cfg.search_space();
    let mut ev = Evaluator {
        cfg,
        data: &data,
        seed,
        best: None,
    };
    let log = |t: &Trial| match live {
        Some(p) => report::append_record(p, &TrialRecord { seed, trial: t.clone() }),
        None => Ok(()),
    };
    let mut trials = match cfg.tuner {
        Tuner::Fixed => {
            let theta = cfg.fixed_theta();
            let start = Instant::now();
            let (value, failed) = match ev.run(&theta) {
                Ok(v) => (v, false),
                Err(e) if is_numeric(&e) => {
                    log::warn!("fixed run failed: {e}");
                    (0.0, true)
                }
                Err(e) => return Err(e),
            };
            let t = Trial {
                trial_index: 0,
                theta,
                value,
                wall_time_s: start.elapsed().as_secs_f64(),
                failed,
            };
            log(&t)?;
            vec![t]
        }
        Tuner::Grid => {
            let ts = bayes::grid_search(&space, cfg.budget, |p| ev.run(&space.values(p)?))?;
            for t in &ts {
                log(t)?;
            }
            ts
        }
        Tuner::Bo => {
            let bo = BoConfig {
                budget: cfg.budget,
                n0: cfg.n0,
                xi: cfg.xi,
                seed,
                timing: cfg.timing,
            };
            bayes::bayes_opt(&space, &bo, prior, |p| ev.run(&space.values(p)?), log)?
        }
    };
    if !cfg.timing {
        for t in &mut trials {
            t.wall_time_s = 0.0;
        }
    }

    let top = bayes::best_trial(&trials).ok_or(Error::Exhausted)?.clone();
    if top.failed {
        return Err(Error::Numeric(format!("every trial failed for seed {seed}")));
    }
    let outcome = match ev.best.take() {
        Some((_, theta, out)) if theta == top.theta => out,
        _ => {
            // The best trial came from a resumed log; replay it.
            let out = run_fgnn(data.clone(), &trial_config(cfg, &top.theta, seed)?)?;
            if score(&out) != top.value {
                return Err(Error::Protocol(format!("replayed trial {} scored differently", top.trial_index)));
            }
            out
        }
    };
    let br = outcome.best_round().ok_or(Error::Exhausted)?;
    let (clients, hidden) = client_configs(&top.theta, cfg.effective_clients())?;
    let report = SeedReport {
        seed,
        trials: trials.len(),
        failed_trials: trials.iter().filter(|t| t.failed).count(),
        best_trial: top.trial_index,
        best_value: top.value,
        best_round: br.round,
        theta: top.theta.clone(),
        clients,
        hidden,
        per_client_val: br.per_client_metric.clone(),
        per_client_test: br.per_client_test.clone(),
        test_accuracy: br.mean_test(),
        messages: outcome.transport.message_count(),
        bytes: outcome.transport.bytes_sent(),
        shares: outcome.transport.shares_generated(),
        tuning_wall_time_s: trials.iter().map(|t| t.wall_time_s).sum(),
    };
    Ok((report, trials, outcome.rounds))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, s)
}

/// Runs the experiment for every seed. Writes nothing except the live trial
/// log when `cfg.out` is set; see [`emit_report`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let g = load_graph(&cfg.dataset)?;
    run_on_graph(cfg, &g)
}

/// As [`run_experiment`] with an already loaded graph.
pub fn run_on_graph(cfg: &ExperimentConfig, g: &Graph) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let live = cfg.out.as_ref().map(|d| d.join(TRIALS_FILE));
    let mut prior: Vec<TrialRecord> = Vec::new();
    if let (Some(dir), Some(path)) = (&cfg.out, &live) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if cfg.resume {
            prior = report::read_records(path)?;
        }
        report::write_records(path, &prior)?;
    }

    let mut runs = Vec::new();
    let mut trials = Vec::new();
    let mut rounds = Vec::new();
    for &seed in &cfg.seeds {
        let own: Vec<Trial> = prior.iter().filter(|r| r.seed == seed).map(|r| r.trial.clone()).collect();
        if !own.is_empty() && cfg.tuner != Tuner::Bo {
            return Err(Error::Config("only bo runs can be resumed".into()));
        }
        let (r, ts, rs) = run_seed(cfg, g, seed, &own, live.as_deref())?;
        log::info!(
            "{} seed {seed}: M={:.4} test={:.4} after {} trials",
            cfg.mode.name(),
            r.best_value,
            r.test_accuracy,
            r.trials
        );
        runs.push(r);
        trials.extend(ts.into_iter().map(|trial| TrialRecord { seed, trial }));
        rounds.extend(rs.into_iter().map(|round| RoundRecord { seed, round }));
    }
    let tests: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let (mean_test, std_test) = mean_std(&tests);
    let (mean_best, _) = mean_std(&runs.iter().map(|r| r.best_value).collect::<Vec<_>>());
    let report = ExperimentReport {
        mode: cfg.mode,
        protocol: cfg.mode.protocol(cfg.js),
        tuner: cfg.tuner,
        split: cfg.split,
        num_clients: cfg.effective_clients(),
        alpha: cfg.alpha,
        rounds: cfg.rounds,
        budget: cfg.budget,
        trial_count: trials.len(),
        tuning_wall_time_s: runs.iter().map(|r| r.tuning_wall_time_s).sum(),
        runs,
        mean_best_value: mean_best,
        mean_test_accuracy: mean_test,
        std_test_accuracy: std_test,
    };
    Ok(ExperimentOutput { report, trials, rounds })
}

/// The automated pipeline: SFGNN tuned by the configured tuner.
pub fn run_asfgnn(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if !matches!(cfg.mode, ExpMode::Asfgnn | ExpMode::Sfgnn) {
        return Err(Error::Config(format!("run_asfgnn called with mode {}", cfg.mode.name())));
    }
    run_experiment(cfg)
}

/// FL, SP or CM under the same tuner.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if !matches!(cfg.mode, ExpMode::Fl | ExpMode::Sp | ExpMode::Cm) {
        return Err(Error::Config(format!("{} is not a baseline", cfg.mode.name())));
    }
    run_experiment(cfg)
}

/// One row per swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mode: ExpMode,
    pub mean_best_value: f64,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub trial_count: usize,
    pub tuning_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub variable: SweepVar,
    pub rows: Vec<SweepRow>,
}

/// Configuration of one sweep point.
pub fn sweep_point(cfg: &ExperimentConfig, var: SweepVar, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    c.sweep = None;
    match var {
        SweepVar::Alpha => c.alpha = value,
        SweepVar::NumClients => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("client count {value}")));
            }
            c.num_clients = value as usize;
            c.split = SplitKind::LabelGroups;
        }
        SweepVar::JsOnOff => c.js = value != 0.0,
    }
    c.out = cfg.out.as_ref().map(|d| d.join(point_dir(var, value)));
    c.validate()?;
    Ok(c)
}

fn point_dir(var: SweepVar, value: f64) -> PathBuf {
    let name = match var {
        SweepVar::Alpha => "alpha",
        SweepVar::NumClients => "clients",
        SweepVar::JsOnOff => "js",
    };
    PathBuf::from(format!("{name}-{value}"))
}

/// Runs the experiment once per value. With `cfg.out` set, each point's files
/// go to their own subdirectory and the table to `sweep.csv`.
pub fn sweep(cfg: &ExperimentConfig, var: SweepVar, values: &[f64]) -> Result<SweepTable> {
    cfg.validate()?;
    let g = load_graph(&cfg.dataset)?;
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let c = sweep_point(cfg, var, v)?;
        let out = run_on_graph(&c, &g)?;
        if let Some(dir) = &c.out {
            emit_report(&out, dir)?;
        }
        let r = &out.report;
        rows.push(SweepRow {
            value: v,
            mode: r.mode,
            mean_best_value: r.mean_best_value,
            mean_test_accuracy: r.mean_test_accuracy,
            std_test_accuracy: r.std_test_accuracy,
            trial_count: r.trial_count,
            tuning_wall_time_s: r.tuning_wall_time_s,
        });
    }
    let table = SweepTable { variable: var, rows };
    if let Some(dir) = &cfg.out {
        write_sweep_csv(&table, dir.join("sweep.csv"))?;
    }
    Ok(table)
}

/// What [`run`] produced.
#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Single(ExperimentReport),
    Sweep(SweepTable),
}

/// Entry point behind the command line: a sweep when the config has one,
/// otherwise a single experiment. Files are written when `cfg.out` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    match &cfg.sweep {
        Some(s) => Ok(RunResult::Sweep(sweep(cfg, s.variable, &s.values)?)),
        None => {
            let out = run_experiment(cfg)?;
            if let Some(dir) = &cfg.out {
                emit_report(&out, dir)?;
            }
            Ok(RunResult::Single(out.report))
        }
    }
}

#[cfg(test)]
mod tests;
