//! Bayesian optimization over a finite hyper-parameter grid.
//!
//! A Gaussian process models `θ ↦ M(θ)` on the `[0,1]^D` encoding of the
//! grid; the next trial maximizes Expected Improvement over a seeded sample of
//! grid points plus the untried neighbours of the incumbent. The first `n0`
//! trials come from a Latin-hypercube design. Grid search enumerates the same
//! space in lexicographic order.

mod gp;
mod space;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};

pub use gp::{gp_fit, gp_predict, GpModel, MAX_JITTER, NOISE};
pub use space::{Dim, Point, Scale, SearchSpace, DEPTH, DROPOUT, HIDDEN, L2, LR};

/// Candidate grid points scored per proposal.
pub const CANDIDATES: usize = 2048;

/// Expected Improvement for maximization.
pub fn expected_improvement(mean: f64, var: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    let sd = var.max(0.0).sqrt();
    if sd == 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = Normal::standard();
    (gain * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_index: usize,
    pub theta: BTreeMap<String, f64>,
    pub value: f64,
    pub wall_time_s: f64,
    /// Set when the evaluation hit a numeric failure; `value` is then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

/// Latin-hypercube design snapped to the grid. Duplicates after snapping are
/// replaced by uniformly drawn distinct points.
pub fn initial_design(space: &SearchSpace, n0: usize, rng: &mut impl Rng) -> Result<Vec<Point>> {
    if n0 == 0 || n0 > space.size() {
        return Err(Error::InvalidArgument(format!(
            "design of {n0} points in a space of {}",
            space.size()
        )));
    }
    let strata: Vec<Vec<usize>> = (0..space.ndims())
        .map(|_| {
            let mut p: Vec<usize> = (0..n0).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n0);
    for i in 0..n0 {
        let u: Vec<f64> = strata
            .iter()
            .map(|s| (s[i] as f64 + rng.random::<f64>()) / n0 as f64)
            .collect();
        let p = space.snap(&u);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    while out.len() < n0 {
        let p = space.nth(rng.random_range(0..space.size())).expect("index below size");
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

/// The untried grid point with the highest EI. Ties go to the point whose
/// encoding is lexicographically smallest.
pub fn propose_next(
    model: &GpModel,
    space: &SearchSpace,
    tried: &HashSet<Point>,
    incumbent: Option<&Point>,
    xi: f64,
    rng: &mut impl Rng,
) -> Result<Point> {
    let size = space.size();
    if tried.len() >= size {
        return Err(Error::Exhausted);
    }
    let mut cands: BTreeSet<Point> = BTreeSet::new();
    if size <= CANDIDATES {
        cands.extend(space.iter());
    } else {
        for _ in 0..CANDIDATES {
            cands.insert(space.nth(rng.random_range(0..size)).expect("index below size"));
        }
    }
    if let Some(inc) = incumbent {
        cands.extend(space.neighbors(inc));
    }
    cands.retain(|p| !tried.contains(p));
    if cands.is_empty() {
        // Every sampled point was already tried; fall back to the first
        // untried points in grid order.
        cands.extend(space.iter().filter(|p| !tried.contains(p)).take(CANDIDATES));
    }
    let best = model.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut top: Option<(f64, Point)> = None;
    for p in cands {
        let (mu, var) = gp_predict(model, &space.encode(&p)?);
        let ei = expected_improvement(mu, var, best, xi);
        if top.as_ref().is_none_or(|(b, _)| ei > *b) {
            top = Some((ei, p));
        }
    }
    top.map(|(_, p)| p).ok_or(Error::Exhausted)
}

fn evaluate<F>(space: &SearchSpace, index: usize, p: &Point, eval: &mut F, timing: bool) -> Result<Trial>
where
    F: FnMut(&Point) -> Result<f64>,
{
    let start = Instant::now();
    let (value, failed) = match eval(p) {
        Ok(v) if v.is_finite() => (v, false),
        Ok(_) | Err(Error::Numeric(_)) | Err(Error::Overflow(_)) => {
            log::warn!("trial {index} failed numerically; recorded as 0");
            (0.0, true)
        }
        Err(e) => return Err(e),
    };
    Ok(Trial {
        trial_index: index,
        theta: space.values(p)?,
        value,
        wall_time_s: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
        failed,
    })
}

/// Evaluates the first `budget` points in lexicographic order.
pub fn grid_search<F>(space: &SearchSpace, budget: usize, mut eval: F) -> Result<Vec<Trial>>
where
    F: FnMut(&Point) -> Result<f64>,
{
    (0..budget.min(space.size()))
        .map(|k| evaluate(space, k, &space.nth(k).expect("below size"), &mut eval, true))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Total trials, design included.
    pub budget: usize,
    pub n0: usize,
    pub xi: f64,
    pub seed: u64,
    /// Record wall-clock time per trial (zero otherwise, for byte-stable logs).
    pub timing: bool,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            budget: 30,
            n0: 5,
            xi: 0.01,
            seed: 0,
            timing: true,
        }
    }
}

/// Runs the optimization loop, continuing after the trials in `prior` (e.g.
/// read back from a log). `on_trial` sees every new trial as soon as it is
/// evaluated. Stops at the budget or when the grid is exhausted.
pub fn bayes_opt<F, G>(
    space: &SearchSpace,
    cfg: &BoConfig,
    prior: &[Trial],
    mut eval: F,
    mut on_trial: G,
) -> Result<Vec<Trial>>
where
    F: FnMut(&Point) -> Result<f64>,
    G: FnMut(&Trial) -> Result<()>,
{
    let mut trials = prior.to_vec();
    let mut tried = HashSet::new();
    let mut points = Vec::new();
    for (k, t) in trials.iter().enumerate() {
        if t.trial_index != k {
            return Err(Error::InvalidArgument(format!("trial log out of order at {k}")));
        }
        let p = space.point(&t.theta)?;
        tried.insert(p.clone());
        points.push(p);
    }
    let budget = cfg.budget.min(space.size());
    let n0 = cfg.n0.min(budget);
    let design = if n0 > 0 {
        initial_design(space, n0, &mut seed::rng(cfg.seed, Stream::Design, &[]))?
    } else {
        Vec::new()
    };
    while trials.len() < budget {
        let k = trials.len();
        let p = match design.get(k) {
            Some(p) if !tried.contains(p) => p.clone(),
            _ => {
                let x = points.iter().map(|p| space.encode(p)).collect::<Result<Vec<_>>>()?;
                let y: Vec<f64> = trials.iter().map(|t| t.value).collect();
                let model = gp_fit(&x, &y)?;
                let inc = trials
                    .iter()
                    .enumerate()
                    .fold(None, |b: Option<(usize, f64)>, (i, t)| match b {
                        Some((_, v)) if v >= t.value => b,
                        _ => Some((i, t.value)),
                    })
                    .map(|(i, _)| &points[i]);
                let mut rng = seed::rng(cfg.seed, Stream::Proposal, &[k as u64]);
                propose_next(&model, space, &tried, inc, cfg.xi, &mut rng)?
            }
        };
        let t = evaluate(space, k, &p, &mut eval, cfg.timing)?;
        log::debug!("trial {k}: {:?} -> {:.4}", t.theta, t.value);
        on_trial(&t)?;
        tried.insert(p.clone());
        points.push(p);
        trials.push(t);
    }
    Ok(trials)
}

/// Index of the best trial (earliest on ties).
pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    trials.iter().fold(None, |b: Option<&Trial>, t| match b {
        Some(x) if x.value >= t.value => b,
        _ => Some(t),
    })
}

/// Reads a JSON-lines trial log; a missing file is an empty log.
pub fn read_trial_log(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Appends one trial to a JSON-lines log.
pub fn append_trial(path: impl AsRef<Path>, t: &Trial) -> Result<()> {
    let path = path.as_ref();
    let mut line = serde_json::to_vec(t)?;
    line.push(b'\n');
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(&line).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> SearchSpace {
        SearchSpace::new(vec![Dim::new("x", (0..n).map(|i| i as f64).collect(), Scale::Index).unwrap()]).unwrap()
    }

    fn cube(n: usize, d: usize) -> SearchSpace {
        SearchSpace::new(
            (0..d)
                .map(|j| Dim::new(format!("x{j}"), (0..n).map(|i| i as f64).collect(), Scale::Index).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn cfg(budget: usize, seed: u64) -> BoConfig {
        BoConfig {
            budget,
            seed,
            timing: false,
            ..BoConfig::default()
        }
    }

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement(0.5, 0.0, 0.5, 0.0), 0.0);
        assert_eq!(expected_improvement(0.8, 0.0, 0.5, 0.1), 0.8 - 0.5 - 0.1);
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((expected_improvement(0.0, 1.0, 0.0, 0.0) - phi0).abs() < 1e-12);
        assert!((expected_improvement(0.0, 1.0, 0.0, 0.0) - 0.39894).abs() < 1e-5);
        for (m, v) in [(-3.0, 0.01), (0.0, 4.0), (2.0, 1e-9), (-50.0, 1.0)] {
            assert!(expected_improvement(m, v, 0.0, 0.01) >= 0.0);
        }
    }

    #[test]
    fn ei_vanishes_at_noise_free_observations() {
        let x = vec![vec![0.0], vec![0.5], vec![1.0]];
        let y = [0.2, 0.9, 0.4];
        let m = gp_fit(&x, &y).unwrap();
        for p in &x {
            let (mu, var) = gp_predict(&m, p);
            assert!(expected_improvement(mu, var, 0.9, 0.01) < 1e-6);
        }
    }

    #[test]
    fn design_examples() {
        let s = SearchSpace::per_client(2);
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let one = initial_design(&s, 1, &mut r).unwrap();
        assert_eq!(one.len(), 1);
        assert!(s.contains(&one[0]));
        let five = initial_design(&s, 5, &mut r).unwrap();
        assert_eq!(five.iter().collect::<HashSet<_>>().len(), 5);
        assert!(initial_design(&line(3), 4, &mut r).is_err());
        // Tiny space: snapping collides, top-up keeps points distinct.
        let all = initial_design(&line(3), 3, &mut r).unwrap();
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 3);
    }

    #[test]
    fn design_covers_each_third() {
        let s = line(30);
        for seed in 0..20 {
            let d = initial_design(&s, 9, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for third in 0..3 {
                assert!(d.iter().any(|p| {
                    let u = s.encode(p).unwrap()[0];
                    u >= third as f64 / 3.0 && u <= (third + 1) as f64 / 3.0
                }));
            }
        }
    }

    #[test]
    fn grid_search_examples() {
        let s = cube(2, 2);
        let t = grid_search(&s, 10, |p| Ok(p[0] as f64 + 2.0 * p[1] as f64)).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[0].theta["x0"], 0.0);
        let one = grid_search(&s, 1, |_| Ok(0.0)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(s.point(&one[0].theta).unwrap(), vec![0, 0]);
    }

    #[test]
    fn propose_returns_last_remaining_point() {
        let s = line(6);
        let tried: HashSet<Point> = (0..6).filter(|&i| i != 3).map(|i| vec![i]).collect();
        let x: Vec<Vec<f64>> = tried.iter().map(|p| s.encode(p).unwrap()).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0]).collect();
        let m = gp_fit(&x, &y).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(propose_next(&m, &s, &tried, None, 0.01, &mut r).unwrap(), vec![3]);
        let mut all = tried.clone();
        all.insert(vec![3]);
        assert!(matches!(propose_next(&m, &s, &all, None, 0.01, &mut r), Err(Error::Exhausted)));
    }

    #[test]
    fn exhausts_small_space_without_repeats() {
        let s = cube(3, 2);
        let f = |p: &Point| Ok(-((p[0] as f64 - 1.0).powi(2) + (p[1] as f64 - 2.0).powi(2)));
        let t = bayes_opt(&s, &cfg(100, 3), &[], f, |_| Ok(())).unwrap();
        assert_eq!(t.len(), 9);
        let pts: HashSet<Point> = t.iter().map(|x| s.point(&x.theta).unwrap()).collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(best_trial(&t).unwrap().value, 0.0);
    }

    #[test]
    fn one_dimensional_quadratic_within_ten_trials() {
        let s = line(20);
        let f = |p: &Point| {
            let u = p[0] as f64 / 19.0;
            Ok(-(u - 0.3).powi(2))
        };
        let opt = (0..20).map(|i| vec![i]).max_by(|a, b| f(a).unwrap().total_cmp(&f(b).unwrap())).unwrap();
        for seed in 0..10 {
            let t = bayes_opt(&s, &cfg(10, seed), &[], f, |_| Ok(())).unwrap();
            assert!(
                t.iter().any(|x| s.point(&x.theta).unwrap() == opt),
                "seed {seed} missed the optimum"
            );
        }
    }

    /// BO against grid search on `f(θ) = −‖encode(θ) − 0.3‖²` over a
    /// 10×10×10 grid.
    #[test]
    fn quarter_of_grid_trials_in_most_seeds() {
        let s = cube(10, 3);
        let f = |p: &Point| Ok(-s.encode(p).unwrap().iter().map(|u| (u - 0.3).powi(2)).sum::<f64>());
        let grid = grid_search(&s, s.size(), f).unwrap();
        let top = best_trial(&grid).unwrap();
        let grid_needs = top.trial_index + 1;
        let allowed = grid_needs / 4;
        let mut wins = 0;
        for seed in 0..10 {
            let t = bayes_opt(&s, &cfg(allowed, seed), &[], f, |_| Ok(())).unwrap();
            if best_trial(&t).unwrap().value >= top.value {
                wins += 1;
            }
        }
        assert!(wins >= 8, "{wins}/10 seeds reached the optimum within {allowed} trials");
    }

    #[test]
    fn resume_reproduces_the_run() {
        let s = cube(6, 2);
        let f = |p: &Point| Ok((p[0] as f64 * 0.7).sin() + (p[1] as f64 * 0.4).cos());
        let full = bayes_opt(&s, &cfg(12, 5), &[], f, |_| Ok(())).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("trials.jsonl");
        bayes_opt(&s, &cfg(7, 5), &[], f, |t| append_trial(&log, t)).unwrap();
        let prior = read_trial_log(&log).unwrap();
        assert_eq!(prior.len(), 7);
        let resumed = bayes_opt(&s, &cfg(12, 5), &prior, f, |t| append_trial(&log, t)).unwrap();
        assert_eq!(resumed, full);
        assert_eq!(read_trial_log(&log).unwrap(), full);
    }

    #[test]
    fn numeric_failures_are_recorded_as_zero() {
        let s = line(4);
        let t = bayes_opt(
            &s,
            &cfg(4, 1),
            &[],
            |p| if p[0] == 2 { Err(Error::Numeric("nan".into())) } else { Ok(1.0) },
            |_| Ok(()),
        )
        .unwrap();
        let bad = t.iter().find(|x| x.theta["x"] == 2.0).unwrap();
        assert!(bad.failed && bad.value == 0.0);
        let err = bayes_opt(&s, &cfg(4, 1), &[], |_| Err(Error::Config("x".into())), |_| Ok(()));
        assert!(err.is_err());
    }
}
