use ndarray::Axis;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, FgnnParams, Optimizer, Tensor};
use crate::sgnn::{Encoder, SgnnParams};

/// One client's full model: separated encoder plus discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub encoder: SgnnParams,
    pub disc: FgnnParams,
}

/// Gradients of the regularized loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<Tensor>,
    pub disc: Vec<Tensor>,
}

impl LocalModel {
    /// Encoder `F → dim` with depth `K`; discriminator `dim → dim → classes`.
    pub fn new(
        num_features: usize,
        dim: usize,
        depth: usize,
        classes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let encoder = SgnnParams::new(num_features, dim, depth, rng)?;
        let disc = FgnnParams::new(dim, dim, classes, rng);
        Ok(LocalModel { encoder, disc })
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.encoder.layers.iter().chain(&self.disc.layers)
    }

    pub fn num_params(&self) -> usize {
        self.encoder.num_params() + self.disc.num_params()
    }

    fn check_disc(&self) -> Result<()> {
        let d = &self.disc.layers;
        if d.len() != 2 || d[0].nrows() != self.encoder.dim() + 1 || d[1].nrows() != d[0].ncols() + 1 {
            return Err(Error::Shape("discriminator does not fit the encoder".into()));
        }
        Ok(())
    }

    /// `l2 · Σ ‖W‖_F` over encoder and discriminator.
    pub fn penalty(&self, l2: f64) -> f64 {
        nn::l2_penalty(self.tensors(), l2)
    }

    /// Regularized training loss without dropout.
    pub fn loss(&self, enc: &Encoder, labels: &[usize], train: &[usize], l2: f64) -> Result<f64> {
        let h = enc.forward(&self.encoder)?.h;
        let logits = disc_logits(&self.disc, &h.select(Axis(0), train))?;
        let y: Vec<usize> = train.iter().map(|&v| labels[v]).collect();
        Ok(nn::softmax_cross_entropy(&logits, &y)?.0 + self.penalty(l2))
    }

    /// Loss and analytic gradients. Dropout (if any) is applied to the
    /// discriminator's hidden activation and the encoder's hidden layers.
    /// Also returns the embeddings of the forward pass.
    pub fn loss_and_grad(
        &self,
        enc: &Encoder,
        labels: &[usize],
        train: &[usize],
        l2: f64,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<(f64, Gradients, Tensor)> {
        self.check_disc()?;
        if train.is_empty() {
            return Err(Error::InvalidArgument("empty training mask".into()));
        }
        let cache = enc.forward_train(&self.encoder, dropout, rng)?;
        let h = cache.embeddings();
        let hr = h.select(Axis(0), train);
        let y: Vec<usize> = train.iter().map(|&v| labels[v]).collect();

        let (w1, w2) = (&self.disc.layers[0], &self.disc.layers[1]);
        let a1 = nn::tanh_act(&nn::linear(&hr, w1)?);
        let mask = (dropout > 0.0)
            .then(|| nn::dropout_mask(a1.dim(), dropout, rng))
            .transpose()?;
        let a1d = match &mask {
            Some(m) => &a1 * m,
            None => a1.clone(),
        };
        let logits = nn::linear(&a1d, w2)?;
        let (ce, prob) = nn::softmax_cross_entropy(&logits, &y)?;
        let loss = ce + self.penalty(l2);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss}")));
        }

        let dz2 = nn::cross_entropy_grad(&prob, &y);
        let mut g2 = nn::linear_weight_grad(&a1d, &dz2);
        let mut da1 = nn::linear_input_grad(w2, &dz2);
        if let Some(m) = &mask {
            da1 *= m;
        }
        let dz1 = nn::tanh_backward(&a1, &da1);
        let mut g1 = nn::linear_weight_grad(&hr, &dz1);
        let dhr = nn::linear_input_grad(w1, &dz1);

        let mut dh = Tensor::zeros(h.raw_dim());
        for (i, &v) in train.iter().enumerate() {
            let mut row = dh.row_mut(v);
            row += &dhr.row(i);
        }
        let mut genc = enc.backward(&self.encoder, &cache, &dh)?;
        if l2 > 0.0 {
            for (g, w) in genc.iter_mut().zip(&self.encoder.layers) {
                *g += &nn::l2_grad(w, l2);
            }
            g1 += &nn::l2_grad(w1, l2);
            g2 += &nn::l2_grad(w2, l2);
        }
        Ok((
            loss,
            Gradients {
                encoder: genc,
                disc: vec![g1, g2],
            },
            cache.embeddings().clone(),
        ))
    }

    /// Plain SGD on every tensor.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        self.apply_with(&mut Optimizer::Sgd, grads, lr)
    }

    pub fn apply_with(&mut self, opt: &mut Optimizer, grads: &Gradients, lr: f64) -> Result<()> {
        let g: Vec<&Tensor> = grads.encoder.iter().chain(&grads.disc).collect();
        opt.step(
            self.encoder.layers.iter_mut().chain(self.disc.layers.iter_mut()),
            &g,
            lr,
        )
    }

    /// Accuracy on each node set, evaluated without dropout on embeddings `h`.
    pub fn evaluate(&self, h: &Tensor, labels: &[usize], sets: &[&[usize]]) -> Result<Vec<f64>> {
        sets.iter()
            .map(|idx| {
                let logits = disc_logits(&self.disc, &h.select(Axis(0), idx))?;
                let y: Vec<usize> = idx.iter().map(|&v| labels[v]).collect();
                Ok(accuracy(&predict(&logits), &y))
            })
            .collect()
    }
}

/// Result of one local optimization phase.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

/// Inference-mode discriminator logits.
pub fn disc_logits(disc: &FgnnParams, h: &Tensor) -> Result<Tensor> {
    let mut a = h.clone();
    let last = disc.layers.len().saturating_sub(1);
    for (l, w) in disc.layers.iter().enumerate() {
        a = nn::linear(&a, w)?;
        if l < last {
            a = nn::tanh_act(&a);
        }
    }
    Ok(a)
}

/// Row-wise argmax; the lowest class id wins ties.
pub fn predict(logits: &Tensor) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of matching entries; 0 for empty input.
pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hit = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    hit as f64 / labels.len() as f64
}
