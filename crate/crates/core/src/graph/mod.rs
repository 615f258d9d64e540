//! Graph representation, dataset I/O and the Non-IID partitioning procedures
//! that build each client's local dataset.

mod io;
mod split;
pub mod synthetic;

use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, write_dataset};
pub use split::{
    median_degree, part_by_classes, split_by_degree, split_degree_clients, split_by_label_groups, split_by_label_ratio, split_label_and_degree,
    ClientDataset, SplitSpec,
};

/// Train / validation / test node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Masks {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![false; num_nodes];
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &v in ids {
                if v >= num_nodes {
                    return Err(Error::Dataset(format!(
                        "{name} mask id {v} out of range for {num_nodes} nodes"
                    )));
                }
                if seen[v] {
                    return Err(Error::Dataset(format!("node {v} appears in two masks")));
                }
                seen[v] = true;
            }
        }
        Ok(())
    }
}

/// An undirected, unweighted, node-labelled graph.
///
/// Edges are stored once as `(lo, hi)` pairs with `lo < hi`, sorted and free of
/// duplicates and self-loops. `adjacency` is derived from `edges` on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub masks: Option<Masks>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, normalizing the edge list (self-loops dropped, pairs
    /// ordered, duplicates removed) and validating every invariant.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let num_nodes = features.nrows();
        if labels.len() != num_nodes {
            return Err(Error::Dataset(format!(
                "{} labels for {num_nodes} feature rows",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Dataset(format!(
                "label {bad} not below class count {num_classes}"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Dataset(format!(
                    "edge ({a},{b}) has an endpoint outside 0..{num_nodes}"
                )));
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Ok(Graph {
            num_nodes,
            edges,
            features,
            labels,
            num_classes,
            masks: None,
            adjacency,
        })
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        masks.validate(self.num_nodes)?;
        self.masks = Some(masks);
        Ok(self)
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Neighbors of `v`, in ascending id order.
    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        self.adjacency
            .get(v)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("node {v} out of range")))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Per-class node counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Subgraph induced by `nodes` (kept in the given order; node `nodes[i]`
    /// becomes node `i`). Edges leaving the set are dropped, masks are
    /// restricted to the kept nodes.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.num_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.num_nodes {
                return Err(Error::InvalidArgument(format!("node {old} out of range")));
            }
            if index[old] != usize::MAX {
                return Err(Error::InvalidArgument(format!("node {old} listed twice")));
            }
            index[old] = new;
        }
        let features = self.features.select(Axis(0), nodes);
        let labels = nodes.iter().map(|&v| self.labels[v]).collect();
        let edges = self.edges.iter().filter_map(|&(a, b)| {
            let (ia, ib) = (index[a], index[b]);
            (ia != usize::MAX && ib != usize::MAX).then_some((ia, ib))
        });
        let mut g = Graph::new(features, labels, self.num_classes, edges.collect::<Vec<_>>())?;
        if let Some(m) = &self.masks {
            let remap = |ids: &[usize]| -> Vec<usize> {
                let mut out: Vec<usize> = ids
                    .iter()
                    .filter_map(|&v| (index[v] != usize::MAX).then_some(index[v]))
                    .collect();
                out.sort_unstable();
                out
            };
            g.masks = Some(Masks {
                train: remap(&m.train),
                val: remap(&m.val),
                test: remap(&m.test),
            });
        }
        Ok(g)
    }

    /// Disjoint union: node ids of `other` are shifted by `self.num_nodes`.
    pub fn disjoint_union(&self, other: &Graph) -> Result<Graph> {
        if self.num_features() != other.num_features() || self.num_classes != other.num_classes
        {
            return Err(Error::Shape(
                "cannot join graphs with different feature or class spaces".into(),
            ));
        }
        let off = self.num_nodes;
        let features =
            ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
                .map_err(|e| Error::Shape(e.to_string()))?;
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        let edges = self
            .edges
            .iter()
            .copied()
            .chain(other.edges.iter().map(|&(a, b)| (a + off, b + off)))
            .collect::<Vec<_>>();
        let mut g = Graph::new(features, labels, self.num_classes, edges)?;
        if let (Some(a), Some(b)) = (&self.masks, &other.masks) {
            let join = |x: &[usize], y: &[usize]| -> Vec<usize> {
                x.iter().copied().chain(y.iter().map(|v| v + off)).collect()
            };
            g.masks = Some(Masks {
                train: join(&a.train, &b.train),
                val: join(&a.val, &b.val),
                test: join(&a.test, &b.test),
            });
        }
        Ok(g)
    }
}

/// Neighbors of `v` in `g` (free-function form).
pub fn neighbors(g: &Graph, v: usize) -> Result<&[usize]> {
    g.neighbors(v)
}
