use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Observation noise floor.
pub const NOISE: f64 = 1e-6;
/// Largest noise tried when the kernel matrix is not numerically positive definite.
pub const MAX_JITTER: f64 = 1e-2;

const LENGTH_SCALES: [f64; 7] = [0.05, 0.1, 0.2, 0.35, 0.5, 1.0, 2.0];
const SIGNAL_FACTORS: [f64; 3] = [0.25, 1.0, 4.0];
const SWEEPS: usize = 2;

/// Fitted Gaussian process with a squared-exponential ARD kernel and a
/// constant prior mean equal to the mean of the observations.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub prior_mean: f64,
    pub length_scales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
    pub log_marginal_likelihood: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn kernel(a: &[f64], b: &[f64], ls: &[f64], sf: f64) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(ls)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    sf * (-0.5 * r2).exp()
}

struct Fit {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    noise: f64,
    lml: f64,
}

fn try_fit(x: &[Vec<f64>], yc: &DVector<f64>, ls: &[f64], sf: f64) -> Option<Fit> {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], ls, sf));
    let mut noise = NOISE;
    loop {
        let mut kn = k.clone();
        for i in 0..n {
            kn[(i, i)] += noise;
        }
        if let Some(chol) = kn.cholesky() {
            let alpha = chol.solve(yc);
            let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
            let lml = -0.5 * yc.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            if lml.is_finite() {
                return Some(Fit { chol, alpha, noise, lml });
            }
        }
        noise *= 10.0;
        if noise > MAX_JITTER * (1.0 + 1e-9) {
            return None;
        }
    }
}

/// Fits the GP; kernel hyper-parameters maximize the marginal likelihood over
/// a fixed lattice (a shared length-scale first, then per-dimension
/// coordinate sweeps).
pub fn gp_fit(x: &[Vec<f64>], y: &[f64]) -> Result<GpModel> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::InvalidArgument(format!("{n} inputs for {} targets", y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("ragged inputs or non-finite targets".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean));
    let var = yc.norm_squared() / n as f64;
    let base = if n >= 2 && var > 1e-12 { var } else { 1.0 };

    let mut best: Option<(Fit, Vec<f64>, f64)> = None;
    let consider = |ls: &[f64], sf: f64, best: &mut Option<(Fit, Vec<f64>, f64)>| {
        if let Some(f) = try_fit(x, &yc, ls, sf) {
            if best.as_ref().is_none_or(|(b, _, _)| f.lml > b.lml) {
                *best = Some((f, ls.to_vec(), sf));
            }
        }
    };
    for &l in &LENGTH_SCALES {
        for &s in &SIGNAL_FACTORS {
            consider(&vec![l; d], s * base, &mut best);
        }
    }
    if best.is_some() && d > 1 {
        for _ in 0..SWEEPS {
            for j in 0..d {
                let (_, ls, sf) = best.as_ref().unwrap();
                let (mut ls, sf) = (ls.clone(), *sf);
                for &l in &LENGTH_SCALES {
                    ls[j] = l;
                    consider(&ls, sf, &mut best);
                }
            }
            let (_, ls, _) = best.as_ref().unwrap();
            let ls = ls.clone();
            for &s in &SIGNAL_FACTORS {
                consider(&ls, s * base, &mut best);
            }
        }
    }
    let (fit, length_scales, signal_var) = best.ok_or_else(|| {
        Error::Numeric(format!("kernel matrix not positive definite even with noise {MAX_JITTER}"))
    })?;
    Ok(GpModel {
        x: x.to_vec(),
        y: y.to_vec(),
        prior_mean: mean,
        length_scales,
        signal_var,
        noise_var: fit.noise,
        log_marginal_likelihood: fit.lml,
        chol: fit.chol,
        alpha: fit.alpha,
    })
}

/// Posterior mean and variance at `x`; the variance is clamped at zero.
pub fn gp_predict(model: &GpModel, x: &[f64]) -> (f64, f64) {
    let ks = DVector::from_iterator(
        model.x.len(),
        model.x.iter().map(|xi| kernel(xi, x, &model.length_scales, model.signal_var)),
    );
    let mean = model.prior_mean + ks.dot(&model.alpha);
    let v = model
        .chol
        .l_dirty()
        .solve_lower_triangular(&ks)
        .expect("Cholesky factor has a positive diagonal");
    let var = (model.signal_var - v.norm_squared()).max(0.0);
    (mean, var)
}
