use ndarray::s;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Glorot-uniform weights for a `fan_in → fan_out` layer, plus a zero bias row.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut w = Tensor::zeros((fan_in + 1, fan_out));
    w.slice_mut(s![..fan_in, ..])
        .mapv_inplace(|_| rng.random_range(-limit..=limit));
    w
}

/// Discriminator weights `W̄_1 .. W̄_L` (bias as the last row of each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgnnParams {
    pub layers: Vec<Tensor>,
}

impl FgnnParams {
    /// Two-layer discriminator: `dim → hidden → classes`.
    pub fn new(dim: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        FgnnParams {
            layers: vec![
                glorot_uniform(dim, hidden, rng),
                glorot_uniform(hidden, classes, rng),
            ],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|w| w.len()).sum()
    }

    pub fn same_shape(&self, other: &FgnnParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.dim() == b.dim())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|w| w.iter().copied()).collect()
    }

    /// Rebuilds parameters with this object's layer shapes from `flat`.
    pub fn unflatten(&self, flat: &[f64]) -> Result<FgnnParams> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} discriminator weights",
                flat.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        let layers = self
            .layers
            .iter()
            .map(|w| {
                let t = Tensor::from_shape_vec(w.raw_dim(), flat[off..off + w.len()].to_vec())
                    .expect("length checked above");
                off += w.len();
                t
            })
            .collect();
        Ok(FgnnParams { layers })
    }
}

/// Per-client optimization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidArgument(format!("l2 {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {}", self.dropout)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let w = glorot_uniform(10, 6, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(w.dim(), (11, 6));
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(w.iter().all(|x| x.abs() <= limit));
        assert!(w.row(10).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn flatten_roundtrip() {
        let p = FgnnParams::new(4, 3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p.num_params(), 5 * 3 + 4 * 2);
        assert_eq!(p.unflatten(&p.flatten()).unwrap(), p);
        assert!(p.unflatten(&[0.0]).is_err());
    }

    #[test]
    fn train_config_validation() {
        let ok = TrainConfig { lr: 0.01, l2: 0.0, dropout: 0.5, seed: 0 };
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { lr: 0.0, ..ok }.validate().is_err());
        assert!(TrainConfig { l2: -1.0, ..ok }.validate().is_err());
        assert!(TrainConfig { dropout: 1.0, ..ok }.validate().is_err());
    }
}
