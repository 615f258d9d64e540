use serde::{Deserialize, Serialize};

use super::{sgd_step, Tensor};
use crate::error::{Error, Result};

/// Update rule applied after each backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// `w ← w − lr·g`.
    Sgd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e−8.
    #[default]
    Adam,
}

/// Optimizer with its per-tensor state.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam {
        m: Vec<Tensor>,
        v: Vec<Tensor>,
        t: i32,
    },
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: Vec::new(),
                v: Vec::new(),
                t: 0,
            },
        }
    }

    /// Updates `params` in place with `grads`, pairwise.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor>,
        grads: &[&Tensor],
        lr: f64,
    ) -> Result<()> {
        let params: Vec<&mut Tensor> = params.into_iter().collect();
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} tensors, {} gradients",
                params.len(),
                grads.len()
            )));
        }
        match self {
            Optimizer::Sgd => {
                for (w, g) in params.into_iter().zip(grads) {
                    sgd_step(w, g, lr)?;
                }
            }
            Optimizer::Adam { m, v, t } => {
                if m.is_empty() {
                    *m = grads.iter().map(|g| Tensor::zeros(g.raw_dim())).collect();
                    *v = m.clone();
                }
                if m.len() != grads.len() || m.iter().zip(grads).any(|(a, g)| a.dim() != g.dim()) {
                    return Err(Error::Shape("gradient shapes changed between steps".into()));
                }
                if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
                    return Err(Error::Numeric("non-finite gradient".into()));
                }
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for (((w, g), m), v) in params.into_iter().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    if w.dim() != g.dim() {
                        return Err(Error::Shape(format!("weight {:?} vs gradient {:?}", w.dim(), g.dim())));
                    }
                    ndarray::Zip::from(w).and(*g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    });
                }
            }
        }
        Ok(())
    }
}
