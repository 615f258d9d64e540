use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a dimension is embedded into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// `index / (card − 1)`.
    Index,
    /// `(ln v − ln lo) / (ln hi − ln lo)`. A zero value is placed at half the
    /// smallest positive value.
    Log,
}

/// One finite dimension of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub values: Vec<f64>,
    pub scale: Scale,
}

impl Dim {
    pub fn new(name: impl Into<String>, values: Vec<f64>, scale: Scale) -> Result<Dim> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("dimension {name} has no values")));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(format!("dimension {name} must be strictly increasing")));
        }
        if scale == Scale::Log && (values[0] < 0.0 || values.iter().filter(|v| **v > 0.0).count() == 0) {
            return Err(Error::InvalidArgument(format!("log dimension {name} needs positive values")));
        }
        Ok(Dim { name, values, scale })
    }

    pub fn card(&self) -> usize {
        self.values.len()
    }

    /// Encoded coordinate of the `i`-th value.
    pub fn coord(&self, i: usize) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return 0.0;
        }
        match self.scale {
            Scale::Index => i as f64 / (n - 1) as f64,
            Scale::Log => {
                let floor = self.values.iter().copied().find(|v| *v > 0.0).unwrap() / 2.0;
                let ln = |v: f64| v.max(floor).ln();
                let (lo, hi) = (ln(self.values[0]), ln(self.values[n - 1]));
                (ln(self.values[i]) - lo) / (hi - lo)
            }
        }
    }

    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.values.iter().position(|&x| x == v)
    }
}

/// A point of the grid: one value index per dimension.
pub type Point = Vec<usize>;

/// Finite product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
}

pub const DROPOUT: [f64; 2] = [0.0, 0.5];
pub const L2: [f64; 5] = [0.0, 5e-4, 1e-3, 5e-3, 1e-2];
pub const DEPTH: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
pub const LR: [f64; 4] = [5e-4, 1e-3, 5e-3, 1e-2];
pub const HIDDEN: [f64; 4] = [64.0, 128.0, 256.0, 512.0];

fn client_dims(prefix: &str) -> Vec<Dim> {
    vec![
        Dim::new(format!("{prefix}dropout"), DROPOUT.to_vec(), Scale::Index).unwrap(),
        Dim::new(format!("{prefix}l2"), L2.to_vec(), Scale::Log).unwrap(),
        Dim::new(format!("{prefix}depth"), DEPTH.to_vec(), Scale::Index).unwrap(),
        Dim::new(format!("{prefix}lr"), LR.to_vec(), Scale::Log).unwrap(),
    ]
}

impl SearchSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("empty search space".into()));
        }
        Ok(SearchSpace { dims })
    }

    /// Four knobs per client (`c{i}.dropout`, `c{i}.l2`, `c{i}.depth`,
    /// `c{i}.lr`) plus the shared `hidden`: `4·I + 1` dimensions.
    pub fn per_client(num_clients: usize) -> Self {
        let mut dims: Vec<Dim> = (0..num_clients).flat_map(|i| client_dims(&format!("c{i}."))).collect();
        dims.push(Dim::new("hidden", HIDDEN.to_vec(), Scale::Index).unwrap());
        SearchSpace { dims }
    }

    /// One set of knobs used by every client (800 points).
    pub fn shared() -> Self {
        let mut dims = client_dims("");
        dims.push(Dim::new("hidden", HIDDEN.to_vec(), Scale::Index).unwrap());
        SearchSpace { dims }
    }

    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    /// Number of grid points (saturating).
    pub fn size(&self) -> usize {
        self.dims.iter().fold(1usize, |a, d| a.saturating_mul(d.card()))
    }

    pub fn contains(&self, p: &[usize]) -> bool {
        p.len() == self.dims.len() && p.iter().zip(&self.dims).all(|(&i, d)| i < d.card())
    }

    fn check(&self, p: &[usize]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("point {p:?} outside the search space")))
        }
    }

    /// Maps a point into `[0,1]^D`.
    pub fn encode(&self, p: &[usize]) -> Result<Vec<f64>> {
        self.check(p)?;
        Ok(p.iter().zip(&self.dims).map(|(&i, d)| d.coord(i)).collect())
    }

    /// Grid point whose coordinates are nearest to `u`, per dimension.
    pub fn snap(&self, u: &[f64]) -> Point {
        u.iter()
            .zip(&self.dims)
            .map(|(&x, d)| {
                (0..d.card())
                    .min_by(|&a, &b| (d.coord(a) - x).abs().total_cmp(&(d.coord(b) - x).abs()))
                    .unwrap()
            })
            .collect()
    }

    /// Point at position `k` of the lexicographic order (last dimension
    /// varies fastest).
    pub fn nth(&self, mut k: usize) -> Option<Point> {
        if k >= self.size() {
            return None;
        }
        let mut p = vec![0; self.dims.len()];
        for (slot, d) in p.iter_mut().zip(&self.dims).rev() {
            *slot = k % d.card();
            k /= d.card();
        }
        Some(p)
    }

    /// Position of `p` in the lexicographic order.
    pub fn rank(&self, p: &[usize]) -> Result<usize> {
        self.check(p)?;
        Ok(p.iter().zip(&self.dims).fold(0, |acc, (&i, d)| acc * d.card() + i))
    }

    pub fn iter(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.size()).map_while(|k| self.nth(k))
    }

    /// Named values of a point.
    pub fn values(&self, p: &[usize]) -> Result<BTreeMap<String, f64>> {
        self.check(p)?;
        Ok(p.iter()
            .zip(&self.dims)
            .map(|(&i, d)| (d.name.clone(), d.values[i]))
            .collect())
    }

    /// Inverse of [`SearchSpace::values`].
    pub fn point(&self, values: &BTreeMap<String, f64>) -> Result<Point> {
        self.dims
            .iter()
            .map(|d| {
                let v = values
                    .get(&d.name)
                    .ok_or_else(|| Error::InvalidArgument(format!("missing value for {}", d.name)))?;
                d.index_of(*v)
                    .ok_or_else(|| Error::InvalidArgument(format!("{} = {v} is not a grid value", d.name)))
            })
            .collect()
    }

    /// Grid neighbours of `p`: every point one index step away in one dimension.
    pub fn neighbors(&self, p: &[usize]) -> Vec<Point> {
        let mut out = Vec::new();
        for (j, d) in self.dims.iter().enumerate() {
            if p[j] > 0 {
                let mut q = p.to_vec();
                q[j] -= 1;
                out.push(q);
            }
            if p[j] + 1 < d.card() {
                let mut q = p.to_vec();
                q[j] += 1;
                out.push(q);
            }
        }
        out
    }
}
