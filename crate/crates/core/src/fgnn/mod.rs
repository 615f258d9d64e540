//! Federated discriminator training.
//!
//! Each client owns a separated encoder and a discriminator. Per round, a
//! client runs its encoder, takes one SGD step on the full training mask, and
//! secret-shares its discriminator weights, label counts and validation
//! accuracy. The server reconstructs only the sums, averages them, and
//! broadcasts the mean weights and the pooled label distribution `Q^s`. Each
//! client then blends `W̄ ← js·W̄_local + (1 − js)·W̄_server` where `js` is the
//! Jensen–Shannon divergence between its own label distribution and `Q^s`.

mod model;
mod protocol;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::FgnnParams;

pub use model::{accuracy, disc_logits, predict, Gradients, LocalModel, StepOutcome};
pub use protocol::{
    run_fgnn, server_aggregate, write_round_log, Aggregate, ClientConfig, ClientState, Federation,
    FgnnConfig, FgnnOutcome, Mode, RoundReport, SecureUpload, SERVER_ID,
};

/// Per-class label counts of a training batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl LabelCounts {
    pub fn from_labels(labels: impl IntoIterator<Item = usize>, num_classes: usize) -> Result<Self> {
        let mut counts = vec![0u64; num_classes];
        for y in labels {
            *counts
                .get_mut(y)
                .ok_or_else(|| Error::InvalidArgument(format!("label {y} ≥ {num_classes}")))? += 1;
        }
        let total = counts.iter().sum();
        Ok(LabelCounts { counts, total })
    }

    pub fn distribution(&self) -> Result<LabelDistribution> {
        LabelDistribution::from_weights(&self.counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }
}

/// A probability vector over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("negative or non-finite probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {s}")));
        }
        Ok(LabelDistribution { probs })
    }

    /// Normalizes non-negative weights. Small negative values left by
    /// fixed-point decoding are clamped to zero.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let w: Vec<f64> = w.iter().map(|&x| if x < 0.0 && x > -1e-6 { 0.0 } else { x }).collect();
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidArgument("weights must be non-negative with a positive sum".into()));
        }
        Ok(LabelDistribution {
            probs: w.iter().map(|x| x / s).collect(),
        })
    }
}

fn kl2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen–Shannon divergence in bits: `½ KL(P‖M) + ½ KL(Q‖M)`, `M = (P+Q)/2`.
pub fn js_divergence(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::Shape(format!(
            "distributions over {} and {} classes",
            p.probs.len(),
            q.probs.len()
        )));
    }
    let m: Vec<f64> = p.probs.iter().zip(&q.probs).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl2(&p.probs, &m) + 0.5 * kl2(&q.probs, &m);
    Ok(js.clamp(0.0, 1.0))
}

/// `js · local + (1 − js) · server`, layer by layer.
pub fn blend_update(local: &FgnnParams, server: &FgnnParams, js: f64) -> Result<FgnnParams> {
    if !(0.0..=1.0).contains(&js) {
        return Err(Error::InvalidArgument(format!("blend weight {js} not in [0,1]")));
    }
    if !local.same_shape(server) {
        return Err(Error::Shape("local and server discriminators differ in shape".into()));
    }
    let layers = local
        .layers
        .iter()
        .zip(&server.layers)
        .map(|(a, b)| a * js + b * (1.0 - js))
        .collect();
    Ok(FgnnParams { layers })
}
