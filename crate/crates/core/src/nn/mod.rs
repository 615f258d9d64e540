//! Dense numerics for the encoder/discriminator stack: forward ops, the
//! regularized cross-entropy loss, SGD, and a finite-difference oracle.
//!
//! Every weight matrix carries its bias as the last row; [`linear`] appends
//! the constant-1 column to its input implicitly.

mod checkpoint;
mod optim;
mod params;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedMatrix};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{glorot_uniform, FgnnParams, TrainConfig};

/// Row-major real matrix.
pub type Tensor = Array2<f64>;

/// `[x, 1] · w` where the last row of `w` is the bias.
pub fn linear(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    if w.nrows() != x.ncols() + 1 {
        return Err(Error::Shape(format!(
            "linear: input width {} needs a weight with {} rows, got {}",
            x.ncols(),
            x.ncols() + 1,
            w.nrows()
        )));
    }
    let k = x.ncols();
    let mut out = x.dot(&w.slice(s![..k, ..]));
    out += &w.row(k);
    Ok(out)
}

/// Gradient of `linear` with respect to its weight: `[x, 1]ᵀ · dy`.
pub(crate) fn linear_weight_grad(x: &Tensor, dy: &Tensor) -> Tensor {
    let k = x.ncols();
    let mut g = Tensor::zeros((k + 1, dy.ncols()));
    g.slice_mut(s![..k, ..]).assign(&x.t().dot(dy));
    g.row_mut(k).assign(&dy.sum_axis(Axis(0)));
    g
}

/// Gradient of `linear` with respect to its input: `dy · w[..k]ᵀ`.
pub(crate) fn linear_input_grad(w: &Tensor, dy: &Tensor) -> Tensor {
    let k = w.nrows() - 1;
    dy.dot(&w.slice(s![..k, ..]).t())
}

pub fn tanh_act(x: &Tensor) -> Tensor {
    x.mapv(f64::tanh)
}

/// `dy ⊙ (1 − y²)` where `y = tanh(z)`.
pub(crate) fn tanh_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let mut out = dy.clone();
    Zip::from(&mut out).and(y).for_each(|g, &y| *g *= 1.0 - y * y);
    out
}

/// Row-wise softmax.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - m).exp());
        let s = row.sum();
        row.mapv_inplace(|z| z / s);
    }
    p
}

/// Mean cross-entropy of `labels` under `softmax(logits)`, computed with a
/// log-sum-exp shift. Returns the loss and the probability matrix.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cross-entropy over zero rows".into()));
    }
    let classes = logits.ncols();
    let mut loss = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        if y >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} not below class count {classes}"
            )));
        }
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        loss += lse - row[y];
    }
    Ok((loss / labels.len() as f64, softmax(logits)))
}

/// `(prob − onehot(labels)) / n`: gradient of the mean cross-entropy with
/// respect to the logits.
pub(crate) fn cross_entropy_grad(prob: &Tensor, labels: &[usize]) -> Tensor {
    let n = labels.len() as f64;
    let mut g = prob.clone();
    for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
        row[y] -= 1.0;
        row.mapv_inplace(|v| v / n);
    }
    g
}

pub fn frobenius(w: &Tensor) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `l2 · Σ ‖W‖_F` (norms, not squared norms).
pub fn l2_penalty<'a>(params: impl IntoIterator<Item = &'a Tensor>, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    l2 * params.into_iter().map(frobenius).sum::<f64>()
}

/// Gradient of `l2 · ‖W‖_F`; zero for the zero matrix.
pub fn l2_grad(w: &Tensor, l2: f64) -> Tensor {
    let norm = frobenius(w);
    if l2 == 0.0 || norm == 0.0 {
        return Tensor::zeros(w.raw_dim());
    }
    w.mapv(|x| l2 * x / norm)
}

/// Inverted-dropout mask: each entry is `1/(1−rate)` with probability
/// `1 − rate`, else 0.
pub fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut impl Rng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0,1)")));
    }
    if rate == 0.0 {
        return Ok(Tensor::ones(shape));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Ok(Tensor::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < keep {
            scale
        } else {
            0.0
        }
    }))
}

/// `w ← w − lr · g`.
pub fn sgd_step(w: &mut Tensor, g: &Tensor, lr: f64) -> Result<()> {
    if w.dim() != g.dim() {
        return Err(Error::Shape(format!(
            "sgd: weight {:?} vs gradient {:?}",
            w.dim(),
            g.dim()
        )));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    w.scaled_add(-lr, g);
    Ok(())
}

/// Central-difference gradient of `f` at `params`, one coordinate at a time.
pub fn finite_diff_grad<F>(mut f: F, params: &[Tensor], eps: f64) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work = params.to_vec();
    let mut grads: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.raw_dim())).collect();
    for t in 0..params.len() {
        for idx in 0..params[t].len() {
            let (r, c) = (idx / params[t].ncols(), idx % params[t].ncols());
            let orig = work[t][[r, c]];
            work[t][[r, c]] = orig + eps;
            let up = f(&work);
            work[t][[r, c]] = orig - eps;
            let down = f(&work);
            work[t][[r, c]] = orig;
            grads[t][[r, c]] = (up - down) / (2.0 * eps);
        }
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_examples() {
        let id = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        assert_eq!(linear(&array![[1.0, 2.0]], &id).unwrap(), array![[1.0, 2.0]]);
        let w = array![[1.0, 2.0], [3.0, 4.0], [0.5, -1.0]];
        assert_eq!(linear(&array![[0.0, 0.0]], &w).unwrap(), array![[0.5, -1.0]]);
        let w = array![[1.0, 2.0], [3.0, 4.0], [0.0, 0.0]];
        assert_eq!(linear(&array![[1.0, 1.0]], &w).unwrap(), array![[4.0, 6.0]]);
        assert!(linear(&array![[1.0, 1.0, 1.0]], &w).is_err());
    }

    #[test]
    fn tanh_examples() {
        assert_eq!(tanh_act(&array![[0.0]])[[0, 0]], 0.0);
        assert!((tanh_act(&array![[20.0]])[[0, 0]] - 1.0).abs() < 1e-6);
        let y = tanh_act(&array![[0.0]]);
        assert_eq!(tanh_backward(&y, &array![[1.0]])[[0, 0]], 1.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, p) = softmax_cross_entropy(&Tensor::zeros((3, 4)), &[0, 1, 3]).unwrap();
        assert_abs_diff_eq!(loss, 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(p[[0, 0]], 0.25, epsilon = 1e-12);

        let (loss, _) = softmax_cross_entropy(&array![[1.0, 0.0]], &[0]).unwrap();
        assert_abs_diff_eq!(loss, (1.0 + (-1f64).exp()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(loss, 0.3133, epsilon = 1e-4);

        let (big, _) = softmax_cross_entropy(&array![[60.0, 0.0]], &[0]).unwrap();
        assert!(big < 1e-20);

        assert!(softmax_cross_entropy(&array![[1.0, 0.0]], &[2]).is_err());
        assert!(softmax_cross_entropy(&array![[1.0, 0.0]], &[0, 1]).is_err());
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = Tensor::from_shape_simple_fn((50, 6), || rng.random_range(-50.0..50.0));
        let p = softmax(&z);
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| (0.0..1.0).contains(&x) || x == 1.0));
        }
    }

    #[test]
    fn l2_examples() {
        let w = array![[3.0], [4.0]];
        assert_eq!(l2_penalty([&w], 0.0), 0.0);
        assert_abs_diff_eq!(l2_penalty([&w], 1.0), 5.0, epsilon = 1e-12);
        let i = Tensor::eye(2);
        assert_abs_diff_eq!(
            l2_penalty([&i, &i], 0.5),
            0.5 * (2f64.sqrt() * 2.0),
            epsilon = 1e-12
        );
        assert_eq!(l2_grad(&Tensor::zeros((2, 2)), 1.0), Tensor::zeros((2, 2)));
    }

    #[test]
    fn dropout_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(dropout_mask((2, 3), 0.0, &mut rng).unwrap(), Tensor::ones((2, 3)));
        assert!(dropout_mask((1, 1), 1.0, &mut rng).is_err());

        let m = dropout_mask((1000, 100), 0.5, &mut rng).unwrap();
        assert!((m.mean().unwrap() - 1.0).abs() < 0.02);

        let a = dropout_mask((4, 4), 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = dropout_mask((4, 4), 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sgd_examples() {
        let mut w = array![[1.0]];
        sgd_step(&mut w, &array![[1.0]], 0.0).unwrap();
        assert_eq!(w, array![[1.0]]);
        sgd_step(&mut w, &array![[1.0]], 0.1).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 0.9, epsilon = 1e-15);

        let g = array![[0.3, -0.2]];
        let mut two = array![[1.0, 1.0]];
        sgd_step(&mut two, &g, 0.1).unwrap();
        sgd_step(&mut two, &g, 0.1).unwrap();
        let mut one = array![[1.0, 1.0]];
        sgd_step(&mut one, &(&g * 2.0), 0.1).unwrap();
        for (a, b) in two.iter().zip(one.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }

        assert!(sgd_step(&mut w, &array![[1.0, 2.0]], 0.1).is_err());
        assert!(sgd_step(&mut w, &array![[f64::NAN]], 0.1).is_err());
    }

    #[test]
    fn finite_diff_examples() {
        let g = finite_diff_grad(|p| p[0][[0, 0]].powi(2), &[array![[3.0]]], 1e-4);
        assert_abs_diff_eq!(g[0][[0, 0]], 6.0, epsilon = 1e-6);
        let g = finite_diff_grad(|_| 4.2, &[array![[3.0, 1.0]]], 1e-4);
        assert_eq!(g[0], array![[0.0, 0.0]]);
    }

    #[test]
    fn cross_entropy_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = Tensor::from_shape_simple_fn((4, 3), || rng.random_range(-2.0..2.0));
        let labels = [0, 2, 1, 2];
        let (_, p) = softmax_cross_entropy(&logits, &labels).unwrap();
        let analytic = cross_entropy_grad(&p, &labels);
        let numeric = finite_diff_grad(
            |ps| softmax_cross_entropy(&ps[0], &labels).unwrap().0,
            &[logits],
            1e-4,
        );
        for (a, n) in analytic.iter().zip(numeric[0].iter()) {
            assert!((a - n).abs() <= 1e-4 * a.abs().max(n.abs()).max(1e-8), "{a} vs {n}");
        }
    }
}
