use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes::SearchSpace;
use crate::error::{Error, Result};
use crate::fgnn::{ClientConfig, Mode};
use crate::nn::OptimizerKind;

/// Model family under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpMode {
    /// SFGNN tuned by Bayesian optimization.
    Asfgnn,
    Sfgnn,
    Fl,
    Sp,
    Cm,
}

impl ExpMode {
    pub fn protocol(self, js: bool) -> Mode {
        match self {
            ExpMode::Asfgnn | ExpMode::Sfgnn => Mode::Sfgnn { js },
            ExpMode::Fl => Mode::Fl,
            ExpMode::Sp => Mode::Sp,
            ExpMode::Cm => Mode::Cm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExpMode::Asfgnn => "asfgnn",
            ExpMode::Sfgnn => "sfgnn",
            ExpMode::Fl => "fl",
            ExpMode::Sp => "sp",
            ExpMode::Cm => "cm",
        }
    }
}

impl std::str::FromStr for ExpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// How the dataset is cut into client datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// Two clients, label distribution ratio `alpha`.
    LabelRatio,
    /// Two clients, low-degree vs high-degree nodes.
    Degree,
    /// Two clients: low-degree part-1 classes vs high-degree part-2 classes.
    LabelDegree,
    /// `num_clients` clients with disjoint class groups.
    LabelGroups,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuner {
    Bo,
    Grid,
    Fixed,
}

impl std::str::FromStr for Tuner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::Config(format!("unknown tuner {s:?}")))
    }
}

/// Which hyper-parameter space the tuner searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    /// Four knobs per client plus the shared hidden width.
    PerClient,
    /// One set of knobs for every client.
    Shared,
}

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Directory in the on-disk dataset format. When absent a Cora-like
    /// citation graph is generated.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Size factor for the generated graph.
    #[serde(default = "one")]
    pub scale: f64,
    /// Generator seed (fixed across experiment seeds, like a real dataset).
    #[serde(default = "one_u64")]
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            scale: 1.0,
            seed: 1,
        }
    }
}

/// Hyper-parameters used by the fixed tuner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub dropout: f64,
    pub l2: f64,
    pub depth: usize,
    pub lr: f64,
    pub hidden: usize,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            dropout: 0.0,
            l2: 5e-4,
            depth: 2,
            lr: 0.01,
            hidden: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVar {
    Alpha,
    NumClients,
    JsOnOff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

/// A full experiment: dataset, split, model family, tuner and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetConfig,
    pub mode: ExpMode,
    #[serde(default = "two")]
    pub num_clients: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "label_ratio")]
    pub split: SplitKind,
    /// Classes of the first part for label-based two-client splits.
    #[serde(default)]
    pub part1_classes: Option<Vec<usize>>,
    /// Degree cut for degree-based splits; the median degree when absent.
    #[serde(default)]
    pub degree_threshold: Option<usize>,
    /// FGNN rounds per trial.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_epochs")]
    pub local_epochs: usize,
    /// Trials per seed.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "bo")]
    pub tuner: Tuner,
    #[serde(default = "per_client")]
    pub space: SpaceKind,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default)]
    pub fixed: FixedParams,
    /// Divergence-weighted blend in SFGNN modes.
    #[serde(default = "yes")]
    pub js: bool,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Continue from `out/trials.jsonl` if it exists.
    #[serde(default)]
    pub resume: bool,
    /// Record wall-clock times; off gives byte-identical outputs across runs.
    #[serde(default = "yes")]
    pub timing: bool,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn label_ratio() -> SplitKind {
    SplitKind::LabelRatio
}
fn default_rounds() -> usize {
    200
}
fn default_epochs() -> usize {
    1
}
fn default_budget() -> usize {
    30
}
fn bo() -> Tuner {
    Tuner::Bo
}
fn per_client() -> SpaceKind {
    SpaceKind::PerClient
}
fn default_n0() -> usize {
    5
}
fn default_xi() -> f64 {
    0.01
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    /// Defaults for everything but the mode.
    pub fn new(mode: ExpMode) -> Self {
        serde_json::from_value(serde_json::json!({ "mode": mode })).expect("defaults deserialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rounds == 0 || self.local_epochs == 0 {
            return bad("rounds and local_epochs must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.num_clients == 0 {
            return bad("num_clients must be at least 1".into());
        }
        if !(0.5..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0.5, 1.0]", self.alpha));
        }
        if self.mode == ExpMode::Asfgnn && self.tuner != Tuner::Bo {
            return bad("asfgnn is tuned by bo; use mode sfgnn for other tuners".into());
        }
        if self.tuner != Tuner::Fixed && self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if self.tuner == Tuner::Bo && !(self.xi >= 0.0) {
            return bad("xi must be non-negative".into());
        }
        let two_client = matches!(self.split, SplitKind::LabelRatio | SplitKind::Degree | SplitKind::LabelDegree);
        if self.mode != ExpMode::Cm && self.num_clients != 1 && two_client && self.num_clients != 2 {
            return bad(format!("split {:?} needs exactly 2 clients", self.split));
        }
        let f = self.fixed;
        if f.depth == 0 || f.hidden == 0 || !(f.lr > 0.0) || !(f.l2 >= 0.0) || !(0.0..1.0).contains(&f.dropout) {
            return bad("invalid fixed hyper-parameters".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep needs at least one value".into());
            }
        }
        if !(self.dataset.scale > 0.0) {
            return bad("dataset scale must be positive".into());
        }
        Ok(())
    }

    /// Number of client models actually trained.
    pub fn effective_clients(&self) -> usize {
        if self.mode == ExpMode::Cm {
            1
        } else {
            self.num_clients
        }
    }

    /// FL and CM train one global model, so they search the shared space.
    pub fn search_space(&self) -> SearchSpace {
        match (self.mode, self.space) {
            (ExpMode::Fl | ExpMode::Cm, _) | (_, SpaceKind::Shared) => SearchSpace::shared(),
            (_, SpaceKind::PerClient) => SearchSpace::per_client(self.effective_clients()),
        }
    }

    /// Named values of the fixed hyper-parameters in the search space's
    /// naming scheme.
    pub fn fixed_theta(&self) -> BTreeMap<String, f64> {
        let f = self.fixed;
        let mut m = BTreeMap::new();
        let per = |m: &mut BTreeMap<String, f64>, p: &str| {
            m.insert(format!("{p}dropout"), f.dropout);
            m.insert(format!("{p}l2"), f.l2);
            m.insert(format!("{p}depth"), f.depth as f64);
            m.insert(format!("{p}lr"), f.lr);
        };
        if self.search_space().dims.iter().any(|d| d.name.starts_with("c0.")) {
            for i in 0..self.effective_clients() {
                per(&mut m, &format!("c{i}."));
            }
        } else {
            per(&mut m, "");
        }
        m.insert("hidden".into(), f.hidden as f64);
        m
    }
}

/// Client configurations and hidden width named by `theta`. A client's own
/// `c{i}.` entries take precedence over shared names.
pub fn client_configs(theta: &BTreeMap<String, f64>, num_clients: usize) -> Result<(Vec<ClientConfig>, usize)> {
    let get = |i: usize, k: &str| -> Result<f64> {
        theta
            .get(&format!("c{i}.{k}"))
            .or_else(|| theta.get(k))
            .copied()
            .ok_or_else(|| Error::Config(format!("theta has no value for {k} (client {i})")))
    };
    let clients = (0..num_clients)
        .map(|i| {
            Ok(ClientConfig {
                depth: get(i, "depth")? as usize,
                lr: get(i, "lr")?,
                l2: get(i, "l2")?,
                dropout: get(i, "dropout")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hidden = theta
        .get("hidden")
        .copied()
        .ok_or_else(|| Error::Config("theta has no hidden width".into()))? as usize;
    Ok((clients, hidden))
}
