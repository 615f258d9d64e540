use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{LocalModel, StepOutcome};
use super::{blend_update, js_divergence, LabelCounts, LabelDistribution};
use crate::error::{Error, Result};
use crate::graph::ClientDataset;
use crate::nn::{Optimizer, OptimizerKind, Tensor, TrainConfig};
use crate::secret::{reconstruct_mean, Endpoint, FixedPoint, Message, PayloadKind, RingElem, SharedVector, Transport};
use crate::seed::{self, Stream};
use crate::sgnn::Encoder;

/// `client_id` carried by server broadcasts.
pub const SERVER_ID: u32 = u32::MAX;

/// Training regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Separated encoders, secret-shared discriminator; `js` toggles the
    /// divergence-weighted blend (off means the server mean replaces the
    /// local discriminator).
    Sfgnn { js: bool },
    /// Federated averaging of every weight, encoder included.
    Fl,
    /// Every client trains alone.
    Sp,
    /// All client data pooled into one model.
    Cm,
}

/// Per-client hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub depth: usize,
    pub lr: f64,
    pub l2: f64,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgnnConfig {
    pub mode: Mode,
    pub rounds: usize,
    /// Embedding width, shared by all clients and by the discriminator's
    /// hidden layer.
    pub dim: usize,
    pub local_epochs: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub clients: Vec<ClientConfig>,
}

impl FgnnConfig {
    fn validate(&self, num_clients: usize) -> Result<()> {
        if self.rounds == 0 || self.dim == 0 || self.local_epochs == 0 {
            return Err(Error::InvalidArgument("rounds, dim and local_epochs must be ≥ 1".into()));
        }
        if self.clients.len() != num_clients {
            return Err(Error::InvalidArgument(format!(
                "{} client configs for {num_clients} clients",
                self.clients.len()
            )));
        }
        for c in &self.clients {
            if c.depth == 0 {
                return Err(Error::InvalidArgument("depth must be ≥ 1".into()));
            }
            train_config(c, 0).validate()?;
        }
        if self.mode == Mode::Fl && self.clients.iter().any(|c| c.depth != self.clients[0].depth) {
            return Err(Error::InvalidArgument("FL needs the same depth on every client".into()));
        }
        Ok(())
    }
}

fn train_config(c: &ClientConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: c.lr,
        l2: c.l2,
        dropout: c.dropout,
        seed,
    }
}

/// One federated round as seen by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    /// `M_t`, the server's mean of client validation accuracies.
    pub global_metric: f64,
    pub per_client_metric: Vec<f64>,
    /// Blend weight used by each client; `None` when no blend happens.
    pub per_client_js: Vec<Option<f64>>,
    /// Local test accuracy of the model evaluated this round (never uploaded).
    pub per_client_test: Vec<f64>,
    pub per_client_loss: Vec<f64>,
}

impl RoundReport {
    pub fn mean_test(&self) -> f64 {
        mean(&self.per_client_test)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Local state of one client.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub data: ClientDataset,
    pub model: LocalModel,
    pub cfg: ClientConfig,
    encoder: Encoder,
    optimizer: Optimizer,
    dropout_rng: ChaCha8Rng,
    share_rng: ChaCha8Rng,
}

impl ClientState {
    pub fn new(
        data: ClientDataset,
        cfg: ClientConfig,
        dim: usize,
        optimizer: OptimizerKind,
        init: &mut impl Rng,
        seed: u64,
    ) -> Result<Self> {
        let id = data.client_id;
        let g = &data.graph;
        let model = LocalModel::new(g.num_features(), dim, cfg.depth, g.num_classes, init)?;
        Ok(ClientState {
            id,
            encoder: Encoder::new(g),
            optimizer: Optimizer::new(optimizer),
            model,
            cfg,
            dropout_rng: seed::rng(seed, Stream::Dropout, &[id as u64]),
            share_rng: seed::rng(seed, Stream::Shares, &[id as u64]),
            data,
        })
    }

    pub fn label_counts(&self) -> Result<LabelCounts> {
        let g = &self.data.graph;
        LabelCounts::from_labels(self.data.masks.train.iter().map(|&v| g.labels[v]), g.num_classes)
    }

    /// Evaluates the current model on the validation and test masks, then
    /// takes `epochs` full-batch SGD steps.
    pub fn train_round(&mut self, epochs: usize) -> Result<StepOutcome> {
        let labels = &self.data.graph.labels;
        let m = &self.data.masks;
        let c = self.cfg;
        let mut first = None;
        for e in 0..epochs.max(1) {
            let (loss, grads, h) =
                self.model
                    .loss_and_grad(&self.encoder, labels, &m.train, c.l2, c.dropout, &mut self.dropout_rng)?;
            if e == 0 {
                let h = if c.dropout > 0.0 {
                    self.encoder.forward(&self.model.encoder)?.h
                } else {
                    h
                };
                let acc = self.model.evaluate(&h, labels, &[&m.val, &m.test])?;
                first = Some(StepOutcome {
                    loss,
                    val_acc: acc[0],
                    test_acc: acc[1],
                });
            }
            self.model.apply_with(&mut self.optimizer, &grads, c.lr)?;
        }
        Ok(first.expect("at least one epoch"))
    }

    /// Current test accuracy of the model.
    pub fn evaluate(&self) -> Result<(f64, f64)> {
        let h = self.encoder.forward(&self.model.encoder)?.h;
        let m = &self.data.masks;
        let acc = self.model.evaluate(&h, &self.data.graph.labels, &[&m.val, &m.test])?;
        Ok((acc[0], acc[1]))
    }
}

/// A client's secret-shared contribution for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureUpload {
    pub client_id: usize,
    pub weights: SharedVector,
    pub counts: SharedVector,
    pub metric: SharedVector,
}

impl SecureUpload {
    pub fn new(
        codec: FixedPoint,
        client_id: usize,
        weights: &[f64],
        counts: &LabelCounts,
        metric: f64,
        parties: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let c: Vec<f64> = counts.counts.iter().map(|&n| n as f64).collect();
        Ok(SecureUpload {
            client_id,
            weights: SharedVector::share(codec, weights, parties, rng)?,
            counts: SharedVector::share(codec, &c, parties, rng)?,
            metric: SharedVector::share(codec, &[metric], parties, rng)?,
        })
    }
}

/// Server output of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// `(1/I) Σ W̄^i`, flattened.
    pub weights: Vec<f64>,
    /// `N^s = Σ N^i`.
    pub counts: Vec<f64>,
    /// `Q^s = N^s / Σ N^s`.
    pub distribution: LabelDistribution,
    /// `M_t = (1/I) Σ M^i`.
    pub metric: f64,
}

/// Runs the share exchange for one round over `transport` and reconstructs
/// the aggregates. Client `k` keeps its own `k`-th share, receives the `k`-th
/// shares of every other client, and forwards the sum to the server; the
/// server only ever sees these sums.
pub fn server_aggregate(
    codec: FixedPoint,
    uploads: &[SecureUpload],
    round: u32,
    transport: &mut Transport,
) -> Result<Aggregate> {
    let n = uploads.len();
    if n < 2 {
        return Err(Error::Protocol(format!("need at least 2 uploads, got {n}")));
    }
    for (i, u) in uploads.iter().enumerate() {
        if u.client_id != i {
            return Err(Error::Protocol(format!("upload {i} is from client {}", u.client_id)));
        }
        for v in [&u.weights, &u.counts, &u.metric] {
            if v.parties() != n || v.scale != codec.frac_bits {
                return Err(Error::Protocol(format!("client {i}: shares not made for {n} parties")));
            }
        }
        if u.weights.len() != uploads[0].weights.len() || u.counts.len() != uploads[0].counts.len() {
            return Err(Error::Shape(format!("client {i}: upload shape differs from client 0")));
        }
    }
    let scale = codec.frac_bits as u8;
    let mut exchange = |kind: PayloadKind, pick: fn(&SecureUpload) -> &SharedVector| -> Result<Vec<Vec<RingElem>>> {
        transport.note_shares(n * pick(&uploads[0]).len() * n);
        let mut partials = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = pick(&uploads[k]).shares[k].clone();
            for (i, u) in uploads.iter().enumerate() {
                if i == k {
                    continue;
                }
                let msg = Message {
                    round,
                    client_id: i as u32,
                    kind,
                    scale,
                    words: pick(u).shares[k].clone(),
                };
                let got = transport.send(Endpoint::Client(k as u32), &msg)?;
                for (a, &w) in acc.iter_mut().zip(&got.words) {
                    *a = codec.ring.add(*a, w);
                }
            }
            let msg = Message {
                round,
                client_id: k as u32,
                kind,
                scale,
                words: acc,
            };
            partials.push(transport.send(Endpoint::Server, &msg)?.words);
        }
        Ok(partials)
    };
    let w = exchange(PayloadKind::Weights, |u| &u.weights)?;
    let c = exchange(PayloadKind::Counts, |u| &u.counts)?;
    let m = exchange(PayloadKind::Metric, |u| &u.metric)?;
    let weights = reconstruct_mean(codec, &w, n)?;
    let counts = reconstruct_mean(codec, &c, 1)?;
    let metric = reconstruct_mean(codec, &m, n)?[0];
    Ok(Aggregate {
        distribution: LabelDistribution::from_weights(&counts)?,
        weights,
        counts,
        metric,
    })
}

fn flatten<'a>(ts: impl IntoIterator<Item = &'a Tensor>) -> Vec<f64> {
    ts.into_iter().flat_map(|t| t.iter().copied()).collect()
}

fn unflatten_into<'a>(ts: impl IntoIterator<Item = &'a mut Tensor>, flat: &[f64]) -> Result<()> {
    let mut off = 0;
    for t in ts {
        let n = t.len();
        let src = flat
            .get(off..off + n)
            .ok_or_else(|| Error::Shape("broadcast shorter than the model".into()))?;
        for (d, &s) in t.iter_mut().zip(src) {
            *d = s;
        }
        off += n;
    }
    if off != flat.len() {
        return Err(Error::Shape("broadcast longer than the model".into()));
    }
    Ok(())
}

/// Bulk-synchronous simulator of the round protocol.
#[derive(Debug, Clone)]
pub struct Federation {
    mode: Mode,
    codec: FixedPoint,
    local_epochs: usize,
    clients: Vec<ClientState>,
    transport: Transport,
    round: u32,
    server: Option<Vec<f64>>,
}

impl Federation {
    /// Builds client states. In CM mode the datasets are pooled first and the
    /// first client config is used.
    pub fn new(datasets: Vec<ClientDataset>, cfg: &FgnnConfig) -> Result<Self> {
        let (datasets, ccfg) = if cfg.mode == Mode::Cm {
            let pooled = ClientDataset::pool(&datasets)?;
            let c = *cfg
                .clients
                .first()
                .ok_or_else(|| Error::InvalidArgument("no client config".into()))?;
            (vec![pooled], vec![c])
        } else {
            (datasets, cfg.clients.clone())
        };
        let check = FgnnConfig {
            clients: ccfg.clone(),
            ..cfg.clone()
        };
        check.validate(datasets.len())?;
        let f = datasets[0].graph.num_features();
        let j = datasets[0].graph.num_classes;
        let mut clients = Vec::with_capacity(datasets.len());
        for (i, (mut d, c)) in datasets.into_iter().zip(ccfg).enumerate() {
            if d.graph.num_features() != f || d.graph.num_classes != j {
                return Err(Error::Shape(format!("client {i} disagrees on features or classes")));
            }
            d.client_id = i;
            let path = if cfg.mode == Mode::Fl { 0 } else { i as u64 };
            let mut init = seed::rng(cfg.seed, Stream::Init, &[path]);
            clients.push(ClientState::new(d, c, cfg.dim, cfg.optimizer, &mut init, cfg.seed)?);
        }
        Ok(Federation {
            mode: cfg.mode,
            codec: FixedPoint::default(),
            local_epochs: cfg.local_epochs,
            clients,
            transport: Transport::new(),
            round: 0,
            server: None,
        })
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    /// Last weights broadcast by the server, as decoded by the clients.
    pub fn server_weights(&self) -> Option<&[f64]> {
        self.server.as_deref()
    }

    fn payload(&self, c: &ClientState) -> Vec<f64> {
        match self.mode {
            Mode::Fl => flatten(c.model.tensors()),
            _ => flatten(&c.model.disc.layers),
        }
    }

    fn broadcast(&mut self, kind: PayloadKind, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        let words = values.iter().map(|&x| self.codec.encode(x)).collect::<Result<Vec<_>>>()?;
        let msg = Message {
            round: self.round,
            client_id: SERVER_ID,
            kind,
            scale: self.codec.frac_bits as u8,
            words,
        };
        (0..self.clients.len())
            .map(|k| {
                let got = self.transport.send(Endpoint::Client(k as u32), &msg)?;
                Ok(got.words.iter().map(|&w| self.codec.decode(w)).collect())
            })
            .collect()
    }

    /// Runs one round and returns its report.
    pub fn step(&mut self) -> Result<RoundReport> {
        self.round += 1;
        let epochs = self.local_epochs;
        let outcomes = self
            .clients
            .iter_mut()
            .map(|c| c.train_round(epochs))
            .collect::<Result<Vec<_>>>()?;
        let metrics: Vec<f64> = outcomes.iter().map(|o| o.val_acc).collect();
        let n = self.clients.len();
        let federated = matches!(self.mode, Mode::Sfgnn { .. } | Mode::Fl) && n >= 2;

        let (global_metric, js) = if federated {
            let mut uploads = Vec::with_capacity(n);
            for (c, o) in self.clients.iter_mut().zip(&outcomes) {
                let w = match self.mode {
                    Mode::Fl => flatten(c.model.tensors()),
                    _ => flatten(&c.model.disc.layers),
                };
                let counts = c.label_counts()?;
                uploads.push(SecureUpload::new(self.codec, c.id, &w, &counts, o.val_acc, n, &mut c.share_rng)?);
            }
            let agg = server_aggregate(self.codec, &uploads, self.round, &mut self.transport)?;
            let weights = self.broadcast(PayloadKind::Weights, &agg.weights)?;
            let pooled = self.broadcast(PayloadKind::Counts, &agg.counts)?;
            let mut js = Vec::with_capacity(n);
            for ((c, w), q) in self.clients.iter_mut().zip(&weights).zip(&pooled) {
                match self.mode {
                    Mode::Fl => {
                        unflatten_into(c.model.encoder.layers.iter_mut().chain(c.model.disc.layers.iter_mut()), w)?;
                        js.push(None);
                    }
                    Mode::Sfgnn { js: use_js } => {
                        let mut server = c.model.disc.clone();
                        unflatten_into(server.layers.iter_mut(), w)?;
                        let d = if use_js {
                            js_divergence(&c.label_counts()?.distribution()?, &LabelDistribution::from_weights(q)?)?
                        } else {
                            0.0
                        };
                        c.model.disc = blend_update(&c.model.disc, &server, d)?;
                        js.push(Some(d));
                    }
                    Mode::Sp | Mode::Cm => unreachable!(),
                }
            }
            self.server = weights.into_iter().next();
            (agg.metric, js)
        } else {
            let js = match self.mode {
                // A lone client's distribution is the pooled one.
                Mode::Sfgnn { .. } => vec![Some(0.0); n],
                _ => vec![None; n],
            };
            if matches!(self.mode, Mode::Sfgnn { .. } | Mode::Fl) {
                self.server = Some(self.payload(&self.clients[0]));
            }
            (mean(&metrics), js)
        };
        Ok(RoundReport {
            round: self.round,
            global_metric,
            per_client_metric: metrics,
            per_client_js: js,
            per_client_test: outcomes.iter().map(|o| o.test_acc).collect(),
            per_client_loss: outcomes.iter().map(|o| o.loss).collect(),
        })
    }
}

/// All rounds of one run plus transport statistics.
#[derive(Debug, Clone)]
pub struct FgnnOutcome {
    pub rounds: Vec<RoundReport>,
    pub transport: Transport,
}

impl FgnnOutcome {
    /// The round with the highest `M_t`; the earliest wins ties.
    pub fn best_round(&self) -> Option<&RoundReport> {
        self.rounds.iter().fold(None, |best: Option<&RoundReport>, r| match best {
            Some(b) if b.global_metric >= r.global_metric => Some(b),
            _ => Some(r),
        })
    }
}

/// Runs `cfg.rounds` rounds of the protocol.
pub fn run_fgnn(datasets: Vec<ClientDataset>, cfg: &FgnnConfig) -> Result<FgnnOutcome> {
    let mut fed = Federation::new(datasets, cfg)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let r = fed.step()?;
        log::trace!("round {} M_t={:.4}", r.round, r.global_metric);
        rounds.push(r);
    }
    Ok(FgnnOutcome {
        rounds,
        transport: fed.transport,
    })
}

/// Writes one JSON object per line.
pub fn write_round_log(path: impl AsRef<Path>, reports: &[RoundReport]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in reports {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, Masks};
    use rand::SeedableRng;

    /// Client whose nodes carry labels from `classes`, features hinting at the label.
    fn client(id: usize, classes: &[usize], n: usize, j: usize, seed: u64) -> ClientDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|v| classes[v % classes.len()]).collect();
        let f = 2 * j;
        let features = Tensor::from_shape_fn((n, f), |(v, c)| {
            let hint = if c == labels[v] { 1.0 } else { 0.0 };
            hint + rng.random_range(-0.3..0.3)
        });
        let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 2) % n)).collect();
        let g = Graph::new(features, labels, j, edges).unwrap();
        let masks = Masks {
            train: (0..n / 2).collect(),
            val: (n / 2..3 * n / 4).collect(),
            test: (3 * n / 4..n).collect(),
        };
        ClientDataset::new(id, g, masks).unwrap()
    }

    fn cfg(mode: Mode, clients: usize) -> FgnnConfig {
        FgnnConfig {
            mode,
            rounds: 5,
            dim: 6,
            local_epochs: 1,
            optimizer: OptimizerKind::Adam,
            seed: 11,
            clients: vec![
                ClientConfig {
                    depth: 2,
                    lr: 0.1,
                    l2: 1e-3,
                    dropout: 0.0,
                };
                clients
            ],
        }
    }

    #[test]
    fn disjoint_labels_give_large_js() {
        let data = vec![client(0, &[0], 12, 2, 1), client(1, &[1], 12, 2, 2)];
        let out = run_fgnn(data, &cfg(Mode::Sfgnn { js: true }, 2)).unwrap();
        for r in &out.rounds {
            for js in &r.per_client_js {
                assert!((js.unwrap() - 0.311_278_124_459_132_8).abs() < 1e-9);
            }
        }
        // Against the pooled distribution each one-class client sits at the
        // [1,0] vs [.5,.5] value; with more clients it approaches 1.
        let data: Vec<ClientDataset> = (0..8).map(|i| client(i, &[i], 8, 8, i as u64)).collect();
        let mut c = cfg(Mode::Sfgnn { js: true }, 8);
        c.rounds = 1;
        let out = run_fgnn(data, &c).unwrap();
        for js in &out.rounds[0].per_client_js {
            assert!(js.unwrap() > 0.5);
        }
    }

    #[test]
    fn identical_clients_have_zero_js() {
        let data = vec![client(0, &[0, 1], 12, 2, 1), client(1, &[0, 1], 12, 2, 1)];
        let out = run_fgnn(data, &cfg(Mode::Sfgnn { js: true }, 2)).unwrap();
        for r in &out.rounds {
            for js in &r.per_client_js {
                assert!(js.unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_client_sfgnn_is_local_training() {
        let d = client(0, &[0, 1], 16, 2, 3);
        let a = run_fgnn(vec![d.clone()], &cfg(Mode::Sfgnn { js: true }, 1)).unwrap();
        let b = run_fgnn(vec![d.clone()], &cfg(Mode::Sp, 1)).unwrap();
        let c = run_fgnn(vec![d.clone()], &cfg(Mode::Cm, 1)).unwrap();
        let f = run_fgnn(vec![d], &cfg(Mode::Fl, 1)).unwrap();
        for ((x, y), (z, w)) in a.rounds.iter().zip(&b.rounds).zip(c.rounds.iter().zip(&f.rounds)) {
            assert_eq!(x.per_client_metric, y.per_client_metric);
            assert_eq!(x.per_client_loss, y.per_client_loss);
            assert_eq!(y.per_client_loss, z.per_client_loss);
            assert_eq!(y.per_client_loss, w.per_client_loss);
            assert_eq!(x.per_client_js, vec![Some(0.0)]);
        }
        assert_eq!(a.transport.message_count(), 0);
    }

    #[test]
    fn sp_and_cm_never_touch_the_wire() {
        let data = vec![client(0, &[0], 10, 2, 1), client(1, &[1], 10, 2, 2)];
        let sp = run_fgnn(data.clone(), &cfg(Mode::Sp, 2)).unwrap();
        assert_eq!(sp.transport.message_count(), 0);
        assert_eq!(sp.transport.shares_generated(), 0);
        let cm = run_fgnn(data, &cfg(Mode::Cm, 2)).unwrap();
        assert_eq!(cm.transport.shares_generated(), 0);
        assert_eq!(cm.rounds[0].per_client_metric.len(), 1);
    }

    #[test]
    fn weights_messages_carry_only_the_discriminator() {
        let data = vec![client(0, &[0], 10, 2, 1), client(1, &[1], 10, 2, 2)];
        let c = cfg(Mode::Sfgnn { js: true }, 2);
        let mut fed = Federation::new(data, &c).unwrap();
        fed.step().unwrap();
        let disc = fed.clients()[0].model.disc.num_params();
        let enc = fed.clients()[0].model.encoder.num_params();
        assert_ne!(disc, enc);
        let env = fed.transport().envelopes();
        assert!(!env.is_empty());
        for e in env.iter().filter(|e| e.kind == PayloadKind::Weights) {
            assert_eq!(e.len, disc);
        }
        // 3 kinds × (2 peer + 2 server) + 2 × 2 broadcasts
        assert_eq!(env.len(), 16);
    }

    #[test]
    fn server_metric_matches_plaintext_mean() {
        let data: Vec<ClientDataset> = (0..3).map(|i| client(i, &[i % 2, 1], 12, 2, i as u64)).collect();
        let out = run_fgnn(data, &cfg(Mode::Sfgnn { js: true }, 3)).unwrap();
        for r in &out.rounds {
            let plain = mean(&r.per_client_metric);
            assert!((r.global_metric - plain).abs() <= 3.0 * 2f64.powi(-20));
        }
    }

    #[test]
    fn server_aggregate_examples() {
        let codec = FixedPoint::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = [0.25, -1.5, 3.0];
        let c0 = LabelCounts { counts: vec![4, 0], total: 4 };
        let c1 = LabelCounts { counts: vec![0, 4], total: 4 };
        let ups = vec![
            SecureUpload::new(codec, 0, &w, &c0, 0.5, 2, &mut rng).unwrap(),
            SecureUpload::new(codec, 1, &w, &c1, 0.7, 2, &mut rng).unwrap(),
        ];
        let mut t = Transport::new();
        let agg = server_aggregate(codec, &ups, 1, &mut t).unwrap();
        for (a, b) in agg.weights.iter().zip(&w) {
            assert!((a - b).abs() <= 2f64.powi(-20));
        }
        assert_eq!(agg.distribution.probs, vec![0.5, 0.5]);
        assert!((agg.metric - 0.6).abs() <= 2f64.powi(-20));
        assert!(server_aggregate(codec, &ups[..1], 1, &mut t).is_err());
        let short = SecureUpload::new(codec, 1, &w[..2], &c1, 0.7, 2, &mut rng).unwrap();
        assert!(matches!(
            server_aggregate(codec, &[ups[0].clone(), short], 1, &mut t),
            Err(Error::Shape(_))
        ));
    }

    /// Plaintext FedAvg of the discriminator with the same seeds, compared
    /// with the secret-shared protocol with the blend switched off.
    #[test]
    fn js_off_matches_plaintext_fedavg() {
        let data = vec![client(0, &[0], 12, 2, 1), client(1, &[1, 0], 12, 2, 2)];
        let c = cfg(Mode::Sfgnn { js: false }, 2);
        let mut fed = Federation::new(data.clone(), &c).unwrap();
        let mut reference: Vec<ClientState> = data
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let mut init = seed::rng(c.seed, Stream::Init, &[i as u64]);
                ClientState::new(d, c.clients[i], c.dim, c.optimizer, &mut init, c.seed).unwrap()
            })
            .collect();
        for _ in 0..c.rounds {
            fed.step().unwrap();
            for r in reference.iter_mut() {
                r.train_round(1).unwrap();
            }
            let avg: Vec<f64> = {
                let a = flatten(&reference[0].model.disc.layers);
                let b = flatten(&reference[1].model.disc.layers);
                a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect()
            };
            for r in reference.iter_mut() {
                unflatten_into(r.model.disc.layers.iter_mut(), &avg).unwrap();
            }
            let got = fed.server_weights().unwrap();
            let worst = got.iter().zip(&avg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-4, "global weights drift {worst}");
        }
    }

    #[test]
    fn round_log_is_jsonl() {
        let data = vec![client(0, &[0], 10, 2, 1), client(1, &[1], 10, 2, 2)];
        let out = run_fgnn(data, &cfg(Mode::Sfgnn { js: true }, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rounds.jsonl");
        write_round_log(&p, &out.rounds).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let back: Vec<RoundReport> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, out.rounds);
        assert!(text.starts_with("{\"round\":1,\"global_metric\":"));
    }

    #[test]
    fn fl_requires_matching_depths() {
        let data = vec![client(0, &[0], 10, 2, 1), client(1, &[1], 10, 2, 2)];
        let mut c = cfg(Mode::Fl, 2);
        c.clients[1].depth = 3;
        assert!(Federation::new(data, &c).is_err());
    }
}
