//! Separated GraphSAGE encoder.
//!
//! ```text
//! h_0      = x · W_0
//! m_k(v)   = mean { h_{k-1}(u) : u ∈ N(v) }          (zero when N(v) = ∅)
//! h_k(v)   = tanh(W_k · [h_{k-1}(v), m_k(v), 1])      k = 1..K
//! H(v)     = h_K(v) / ‖h_K(v)‖₂                       (zero rows stay zero)
//! ```
//!
//! The per-node functions ([`initial_embedding`], [`mean_aggregate`],
//! [`sage_layer`]) state the math one node at a time; [`Encoder`] runs the
//! same computation batched over a whole graph and provides the backward pass.

use ndarray::{s, Array1, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{self, glorot_uniform, Tensor};

/// Encoder weights: `layers[0]` is the input projection `W_0`
/// (`(F+1) × dim`), `layers[k]` for `k = 1..=K` are `(2·dim+1) × dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnnParams {
    pub layers: Vec<Tensor>,
}

impl SgnnParams {
    pub fn new(num_features: usize, dim: usize, depth: usize, rng: &mut impl Rng) -> Result<Self> {
        if depth == 0 || dim == 0 {
            return Err(Error::InvalidArgument("encoder needs K ≥ 1 and dim ≥ 1".into()));
        }
        let mut layers = vec![glorot_uniform(num_features, dim, rng)];
        for _ in 0..depth {
            layers.push(glorot_uniform(2 * dim, dim, rng));
        }
        Ok(SgnnParams { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.layers[0].ncols()
    }

    pub fn num_features(&self) -> usize {
        self.layers[0].nrows() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|w| w.len()).sum()
    }

    fn check(&self, num_features: usize) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::Shape("encoder needs W_0 and at least one layer".into()));
        }
        if self.num_features() != num_features {
            return Err(Error::Shape(format!(
                "W_0 expects {} features, graph has {num_features}",
                self.num_features()
            )));
        }
        let d = self.dim();
        for (k, w) in self.layers.iter().enumerate().skip(1) {
            if w.dim() != (2 * d + 1, d) {
                return Err(Error::Shape(format!(
                    "W_{k} is {:?}, expected {:?}",
                    w.dim(),
                    (2 * d + 1, d)
                )));
            }
        }
        Ok(())
    }
}

/// Normalized node embeddings, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub h: Tensor,
}

/// `h_0 = x · W_0` (with bias row).
pub fn initial_embedding(features: &Tensor, w0: &Tensor) -> Result<Tensor> {
    nn::linear(features, w0)
}

/// Mean of the rows of `h_prev` listed in `nbrs`; the zero vector when empty.
pub fn mean_aggregate(h_prev: &Tensor, nbrs: &[usize]) -> Result<Array1<f64>> {
    let mut acc = Array1::zeros(h_prev.ncols());
    if nbrs.is_empty() {
        return Ok(acc);
    }
    for &u in nbrs {
        if u >= h_prev.nrows() {
            return Err(Error::InvalidArgument(format!("neighbor {u} out of range")));
        }
        acc += &h_prev.row(u);
    }
    acc /= nbrs.len() as f64;
    Ok(acc)
}

/// `tanh(W_k · [h_self, h_nbr, 1])`.
pub fn sage_layer(h_self: ArrayView1<f64>, h_nbr: ArrayView1<f64>, wk: &Tensor) -> Result<Array1<f64>> {
    let d = h_self.len();
    if h_nbr.len() != d || wk.nrows() != 2 * d + 1 {
        return Err(Error::Shape(format!(
            "sage layer: widths {} / {} against weight {:?}",
            d,
            h_nbr.len(),
            wk.dim()
        )));
    }
    let pre = h_self.dot(&wk.slice(s![..d, ..]))
        + h_nbr.dot(&wk.slice(s![d..2 * d, ..]))
        + wk.row(2 * d);
    Ok(pre.mapv(f64::tanh))
}

/// Runs the encoder over `g` in inference mode.
pub fn sgnn_forward(g: &Graph, params: &SgnnParams) -> Result<Embeddings> {
    Encoder::new(g).forward(params)
}

/// Compressed sparse rows of the feature matrix.
#[derive(Debug, Clone)]
struct SparseRows {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    ncols: usize,
}

impl SparseRows {
    fn from_dense(x: &Tensor) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in x.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseRows {
            indptr,
            indices,
            values,
            ncols: x.ncols(),
        }
    }

    fn row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[v]..self.indptr[v + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// `[x, 1] · w`.
    fn project(&self, w: &Tensor) -> Tensor {
        let n = self.indptr.len() - 1;
        let bias = w.row(self.ncols);
        let mut out = Tensor::zeros((n, w.ncols()));
        for (v, mut row) in out.rows_mut().into_iter().enumerate() {
            row.assign(&bias);
            for (j, x) in self.row(v) {
                row.scaled_add(x, &w.row(j));
            }
        }
        out
    }

    /// `[x, 1]ᵀ · dy`.
    fn project_grad(&self, dy: &Tensor) -> Tensor {
        let mut g = Tensor::zeros((self.ncols + 1, dy.ncols()));
        for (v, d) in dy.rows().into_iter().enumerate() {
            for (j, x) in self.row(v) {
                g.row_mut(j).scaled_add(x, &d);
            }
        }
        g.row_mut(self.ncols).assign(&dy.sum_axis(Axis(0)));
        g
    }
}

/// Saved activations for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    /// Inputs to each layer, after dropout (`h[0] = h_0`, `h[k]` feeds layer `k+1`).
    inputs: Vec<Tensor>,
    /// Neighbor means `m_k`, `k = 1..=K`.
    means: Vec<Tensor>,
    /// tanh outputs `h_k` before dropout, `k = 1..=K`.
    outputs: Vec<Tensor>,
    /// Dropout masks applied to `h_k` for `k = 1..K-1`.
    masks: Vec<Option<Tensor>>,
    norms: Vec<f64>,
    embeddings: Tensor,
}

impl EncoderCache {
    pub fn embeddings(&self) -> &Tensor {
        &self.embeddings
    }
}

/// Graph-bound encoder: precomputes the sparse feature rows and adjacency
/// once so repeated forward/backward passes over the same client graph are
/// cheap.
#[derive(Debug, Clone)]
pub struct Encoder {
    features: SparseRows,
    adjacency: Vec<Vec<usize>>,
}

impl Encoder {
    pub fn new(g: &Graph) -> Self {
        Encoder {
            features: SparseRows::from_dense(&g.features),
            adjacency: g.adjacency().to_vec(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Neighbor means. Rows are summed in an order fixed by their values, so
    /// the result depends only on the multiset of neighbor rows and
    /// relabeling the nodes permutes the output exactly.
    fn aggregate(&self, h: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(h.raw_dim());
        let mut order = Vec::new();
        for (v, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            order.clear();
            order.extend_from_slice(nbrs);
            if order.len() > 2 {
                order.sort_by(|&a, &b| {
                    h.row(a)
                        .iter()
                        .zip(h.row(b))
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            }
            let mut row = out.row_mut(v);
            for &u in &order {
                row += &h.row(u);
            }
            row /= nbrs.len() as f64;
        }
        out
    }

    fn aggregate_backward(&self, dm: &Tensor, dh: &mut Tensor) {
        for (v, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let scale = 1.0 / nbrs.len() as f64;
            let d = dm.row(v);
            for &u in nbrs {
                dh.row_mut(u).scaled_add(scale, &d);
            }
        }
    }

    /// Inference-mode forward pass.
    pub fn forward(&self, params: &SgnnParams) -> Result<Embeddings> {
        let mut idle = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let cache = self.forward_train(params, 0.0, &mut idle)?;
        Ok(Embeddings { h: cache.embeddings })
    }

    /// Forward pass keeping the activations needed by [`Encoder::backward`].
    /// With `dropout > 0`, inverted dropout is applied to the hidden
    /// activations `h_1 .. h_{K-1}`.
    pub fn forward_train(
        &self,
        params: &SgnnParams,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<EncoderCache> {
        params.check(self.features.ncols)?;
        let depth = params.depth();
        let d = params.dim();
        let mut h = self.features.project(&params.layers[0]);
        let mut inputs = Vec::with_capacity(depth);
        let mut means = Vec::with_capacity(depth);
        let mut outputs = Vec::with_capacity(depth);
        let mut masks = Vec::with_capacity(depth);
        for k in 1..=depth {
            let w = &params.layers[k];
            let m = self.aggregate(&h);
            let mut z = h.dot(&w.slice(s![..d, ..]));
            z += &m.dot(&w.slice(s![d..2 * d, ..]));
            z += &w.row(2 * d);
            let out = nn::tanh_act(&z);
            let (next, mask) = if k < depth && dropout > 0.0 {
                let mask = nn::dropout_mask(out.dim(), dropout, rng)?;
                (&out * &mask, Some(mask))
            } else {
                (out.clone(), None)
            };
            inputs.push(h);
            means.push(m);
            outputs.push(out);
            masks.push(mask);
            h = next;
        }
        let (embeddings, norms) = normalize_rows(&h);
        Ok(EncoderCache {
            inputs,
            means,
            outputs,
            masks,
            norms,
            embeddings,
        })
    }

    /// Gradients of a scalar loss with respect to every encoder weight, given
    /// `d_emb = ∂loss/∂H`.
    pub fn backward(
        &self,
        params: &SgnnParams,
        cache: &EncoderCache,
        d_emb: &Tensor,
    ) -> Result<Vec<Tensor>> {
        if d_emb.dim() != cache.embeddings.dim() {
            return Err(Error::Shape("embedding gradient shape".into()));
        }
        let depth = params.depth();
        let d = params.dim();
        let mut grads = vec![Tensor::zeros((0, 0)); depth + 1];

        // Through the row normalization: dh = (dH − H·(H·dH)) / ‖h‖.
        let mut dh = Tensor::zeros(d_emb.raw_dim());
        for v in 0..dh.nrows() {
            let norm = cache.norms[v];
            if norm == 0.0 {
                continue;
            }
            let hv = cache.embeddings.row(v);
            let gv = d_emb.row(v);
            let proj = hv.dot(&gv);
            let mut row = dh.row_mut(v);
            row.assign(&gv);
            row.scaled_add(-proj, &hv);
            row /= norm;
        }

        for k in (1..=depth).rev() {
            let i = k - 1;
            if let Some(mask) = &cache.masks[i] {
                dh *= mask;
            }
            let dz = nn::tanh_backward(&cache.outputs[i], &dh);
            let w = &params.layers[k];
            let input = &cache.inputs[i];
            let mean = &cache.means[i];
            let mut g = Tensor::zeros(w.raw_dim());
            g.slice_mut(s![..d, ..]).assign(&input.t().dot(&dz));
            g.slice_mut(s![d..2 * d, ..]).assign(&mean.t().dot(&dz));
            g.row_mut(2 * d).assign(&dz.sum_axis(Axis(0)));
            grads[k] = g;

            let mut d_prev = dz.dot(&w.slice(s![..d, ..]).t());
            let dm = dz.dot(&w.slice(s![d..2 * d, ..]).t());
            self.aggregate_backward(&dm, &mut d_prev);
            dh = d_prev;
        }
        grads[0] = self.features.project_grad(&dh);
        Ok(grads)
    }
}

fn normalize_rows(h: &Tensor) -> (Tensor, Vec<f64>) {
    let mut out = h.clone();
    let mut norms = Vec::with_capacity(h.nrows());
    let mut zero = 0usize;
    for mut row in out.rows_mut() {
        let n = row.dot(&row).sqrt();
        norms.push(n);
        if n > 0.0 {
            row /= n;
        } else {
            zero += 1;
        }
    }
    if zero > 0 {
        log::debug!("{zero} embedding rows are zero and were left unnormalized");
    }
    (out, norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn initial_embedding_examples() {
        let x = array![[1.0, 2.0]];
        let id = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        assert_eq!(initial_embedding(&x, &id).unwrap(), x);
        assert_eq!(
            initial_embedding(&Tensor::zeros((2, 2)), &id).unwrap(),
            Tensor::zeros((2, 2))
        );
        let w = array![[1.0, -1.0], [2.0, 0.5], [0.0, 0.0]];
        assert_eq!(initial_embedding(&x, &w).unwrap(), array![[5.0, 0.0]]);
    }

    #[test]
    fn mean_aggregate_examples() {
        let h = array![[1.0, 2.0], [3.0, 4.0], [9.0, 9.0]];
        assert_eq!(mean_aggregate(&h, &[0, 1]).unwrap().to_vec(), vec![2.0, 3.0]);
        assert_eq!(mean_aggregate(&h, &[2]).unwrap().to_vec(), vec![9.0, 9.0]);
        assert_eq!(mean_aggregate(&h, &[]).unwrap().to_vec(), vec![0.0, 0.0]);
        assert!(mean_aggregate(&h, &[3]).is_err());
    }

    #[test]
    fn sage_layer_examples() {
        let z = Array1::zeros(2);
        let w = Tensor::zeros((5, 2));
        assert_eq!(sage_layer(z.view(), z.view(), &w).unwrap().to_vec(), vec![0.0, 0.0]);

        let mut w = Tensor::zeros((5, 1));
        w[[0, 0]] = 1.0;
        let out = sage_layer(array![1.0, 0.0].view(), array![0.0, 0.0].view(), &w).unwrap();
        assert_abs_diff_eq!(out[0], 1f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(out[0], 0.7616, epsilon = 1e-4);

        assert!(sage_layer(z.view(), array![1.0].view(), &Tensor::zeros((5, 2))).is_err());
    }

    #[test]
    fn sage_layer_matches_linear_then_tanh() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = glorot_uniform(6, 3, &mut rng);
        let a = Array1::from_shape_simple_fn(3, || rng.random_range(-1.0..1.0));
        let b = Array1::from_shape_simple_fn(3, || rng.random_range(-1.0..1.0));
        let cat = ndarray::concatenate(Axis(0), &[a.view(), b.view()])
            .unwrap()
            .insert_axis(Axis(0));
        let oracle = nn::tanh_act(&nn::linear(&cat, &w).unwrap());
        let got = sage_layer(a.view(), b.view(), &w).unwrap();
        for (x, y) in got.iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn isolated_nodes_depend_on_own_features_only() {
        let g = Graph::new(array![[1.0, 0.0], [0.0, 1.0]], vec![0, 0], 1, []).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = SgnnParams::new(2, 3, 1, &mut rng).unwrap();
        let both = sgnn_forward(&g, &p).unwrap();
        let single = Graph::new(array![[1.0, 0.0]], vec![0], 1, []).unwrap();
        let alone = sgnn_forward(&single, &p).unwrap();
        assert_eq!(both.h.row(0), alone.h.row(0));
    }

    #[test]
    fn rows_are_unit_or_zero() {
        let g = Graph::new(
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec![0, 0, 0],
            1,
            [(0, 1), (1, 2)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SgnnParams::new(2, 4, 2, &mut rng).unwrap();
        let e = sgnn_forward(&g, &p).unwrap();
        for row in e.h.rows() {
            assert_abs_diff_eq!(row.dot(&row).sqrt(), 1.0, epsilon = 1e-12);
        }
        let zero = SgnnParams {
            layers: p.layers.iter().map(|w| Tensor::zeros(w.raw_dim())).collect(),
        };
        let e = sgnn_forward(&g, &zero).unwrap();
        assert!(e.h.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shape_errors() {
        let g = Graph::new(array![[1.0, 0.0]], vec![0], 1, []).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SgnnParams::new(3, 4, 1, &mut rng).unwrap();
        assert!(sgnn_forward(&g, &p).is_err());
        assert!(SgnnParams::new(3, 4, 0, &mut rng).is_err());
    }

    proptest::proptest! {
        #[test]
        fn relabeling_nodes_permutes_embeddings_exactly(seed in proptest::prelude::any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let n = r.random_range(2..12);
            let x = Tensor::from_shape_simple_fn((n, 3), || r.random_range(-2.0..2.0));
            let edges: Vec<(usize, usize)> = (0..3 * n).map(|_| (r.random_range(0..n), r.random_range(0..n))).collect();
            let g = Graph::new(x.clone(), vec![0; n], 1, edges.clone()).unwrap();
            let p = SgnnParams::new(3, 4, 3, &mut r).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut r);
            let mut inv = vec![0; n];
            for (v, &q) in perm.iter().enumerate() {
                inv[q] = v;
            }
            let moved: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
            let g2 = Graph::new(x.select(Axis(0), &inv), vec![0; n], 1, moved).unwrap();
            let (h, h2) = (sgnn_forward(&g, &p).unwrap().h, sgnn_forward(&g2, &p).unwrap().h);
            for v in 0..n {
                proptest::prop_assert_eq!(h.row(v), h2.row(perm[v]));
            }
        }
    }
}
