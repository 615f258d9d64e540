//! Seeded generator for citation-style benchmark graphs.
//!
//! Produces a homophilous graph with bag-of-words features: each class owns a
//! block of "topic" words, documents mix topic words with background
//! vocabulary, and edges are sampled with Chung–Lu style degree weights so the
//! degree distribution is heavy-tailed. [`CitationConfig::cora_like`] matches
//! the public statistics of Cora (2708 nodes, 7 classes with the Planetoid
//! class sizes and label order, 1433 binary features, 5278 undirected edges,
//! 20/500/1000 train/val/test split).

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, Masks};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationConfig {
    pub class_sizes: Vec<usize>,
    pub num_features: usize,
    /// Mean number of distinct words per document.
    pub mean_words: f64,
    /// Size of each class's topic vocabulary.
    pub topic_words: usize,
    /// Probability that a word is drawn from the document's own topic block.
    pub topic_weight: f64,
    pub num_edges: usize,
    /// Fraction of edges joining two nodes of the same class.
    pub homophily: f64,
    /// Pareto shape of the degree weights; smaller is heavier-tailed.
    pub degree_shape: f64,
    pub train_per_class: usize,
    pub num_val: usize,
    pub num_test: usize,
}

impl CitationConfig {
    /// Cora class order: Theory, Reinforcement_Learning, Genetic_Algorithms,
    /// Neural_Networks, Probabilistic_Methods, Case_Based, Rule_Learning.
    pub const CORA_CLASS_SIZES: [usize; 7] = [351, 217, 418, 818, 426, 298, 180];

    /// Classes forming the first Cora part (theory, reinforcement learning,
    /// genetic algorithms, probabilistic methods: 1412 nodes).
    pub const CORA_PART1: [usize; 4] = [0, 1, 2, 4];
    /// The remaining three classes (1296 nodes).
    pub const CORA_PART2: [usize; 3] = [3, 5, 6];

    pub fn cora_like() -> Self {
        CitationConfig {
            class_sizes: Self::CORA_CLASS_SIZES.to_vec(),
            num_features: 1433,
            mean_words: 18.0,
            topic_words: 120,
            topic_weight: 0.3,
            num_edges: 5278,
            homophily: 0.81,
            degree_shape: 2.2,
            train_per_class: 20,
            num_val: 500,
            num_test: 1000,
        }
    }

    /// Same class proportions and densities with node, edge, feature and mask
    /// counts multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |x: usize| ((x as f64 * factor).round() as usize).max(1);
        CitationConfig {
            class_sizes: self.class_sizes.iter().map(|&c| s(c).max(4)).collect(),
            num_features: s(self.num_features).max(self.class_sizes.len()),
            topic_words: s(self.topic_words).max(4),
            num_edges: s(self.num_edges),
            train_per_class: s(self.train_per_class).max(2),
            num_val: s(self.num_val),
            num_test: s(self.num_test),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let n: usize = self.class_sizes.iter().sum();
        let j = self.class_sizes.len();
        if j == 0 || n < 2 {
            return Err(Error::InvalidArgument("need at least two nodes".into()));
        }
        if self.topic_words * j > self.num_features {
            return Err(Error::InvalidArgument(
                "topic blocks exceed the vocabulary".into(),
            ));
        }
        if self.train_per_class * j + self.num_val + self.num_test > n {
            return Err(Error::InvalidArgument("masks exceed node count".into()));
        }
        if !(0.0..=1.0).contains(&self.homophily) || !(0.0..=1.0).contains(&self.topic_weight) {
            return Err(Error::InvalidArgument("probabilities must be in [0,1]".into()));
        }
        Ok(())
    }

    pub fn generate(&self, seed: u64) -> Result<Graph> {
        self.validate()?;
        let mut rng = seed::rng(seed, Stream::Dataset, &[]);
        let j = self.class_sizes.len();
        let labels: Vec<usize> = self
            .class_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
            .collect();
        let n = labels.len();

        let features = self.features(&labels, &mut rng);
        let weights: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>().max(1e-12);
                u.powf(-1.0 / self.degree_shape)
            })
            .collect();
        let edges = self.edges(&labels, &weights, j, &mut rng)?;
        let masks = self.masks(&labels, j, &mut rng);
        Graph::new(features, labels, j, edges)?.with_masks(masks)
    }

    fn features(&self, labels: &[usize], rng: &mut impl Rng) -> Array2<f64> {
        let n = labels.len();
        let f = self.num_features;
        let mut x = Array2::zeros((n, f));
        for (v, &c) in labels.iter().enumerate() {
            // Poisson-ish word count: sum of Bernoulli draws around the mean.
            let spread = self.mean_words * 0.5;
            let count = (self.mean_words + spread * (rng.random::<f64>() * 2.0 - 1.0))
                .round()
                .max(1.0) as usize;
            let block = c * self.topic_words;
            for _ in 0..count {
                let w = if rng.random::<f64>() < self.topic_weight {
                    block + rng.random_range(0..self.topic_words)
                } else {
                    rng.random_range(0..f)
                };
                x[[v, w]] = 1.0;
            }
        }
        x
    }

    fn edges(
        &self,
        labels: &[usize],
        weights: &[f64],
        j: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<(usize, usize)>> {
        let n = labels.len();
        let by_class: Vec<Vec<usize>> = (0..j)
            .map(|c| (0..n).filter(|&v| labels[v] == c).collect())
            .collect();
        let class_pick: Vec<WeightedIndex<f64>> = by_class
            .iter()
            .map(|ids| WeightedIndex::new(ids.iter().map(|&v| weights[v])))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let class_mass = WeightedIndex::new(by_class.iter().map(|ids| {
            let s: f64 = ids.iter().map(|&v| weights[v]).sum();
            if ids.len() > 1 {
                s
            } else {
                0.0
            }
        }))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let global = WeightedIndex::new(weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;

        let max_edges = n * (n - 1) / 2;
        let target = self.num_edges.min(max_edges);
        let mut set = BTreeSet::new();
        let mut attempts = 0usize;
        while set.len() < target {
            attempts += 1;
            if attempts > target * 200 + 10_000 {
                return Err(Error::InvalidArgument(
                    "edge target unreachable with these weights".into(),
                ));
            }
            let (a, b) = if rng.random::<f64>() < self.homophily {
                let c = class_mass.sample(rng);
                let ids = &by_class[c];
                (ids[class_pick[c].sample(rng)], ids[class_pick[c].sample(rng)])
            } else {
                let a = global.sample(rng);
                let b = global.sample(rng);
                if labels[a] == labels[b] {
                    continue;
                }
                (a, b)
            };
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(set.into_iter().collect())
    }

    fn masks(&self, labels: &[usize], j: usize, rng: &mut impl Rng) -> Masks {
        let n = labels.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut taken = vec![0usize; j];
        let mut train = Vec::new();
        let mut rest = Vec::new();
        for v in order {
            if taken[labels[v]] < self.train_per_class {
                taken[labels[v]] += 1;
                train.push(v);
            } else {
                rest.push(v);
            }
        }
        let mut val = rest[..self.num_val].to_vec();
        let mut test = rest[self.num_val..self.num_val + self.num_test].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Masks { train, val, test }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cora_like_statistics() {
        let g = CitationConfig::cora_like().generate(1).unwrap();
        assert_eq!(g.num_nodes, 2708);
        assert_eq!(g.num_features(), 1433);
        assert_eq!(g.num_classes, 7);
        assert_eq!(g.edges.len(), 5278);
        assert_eq!(g.class_counts(), CitationConfig::CORA_CLASS_SIZES.to_vec());
        let part1: usize = CitationConfig::CORA_PART1
            .iter()
            .map(|&c| CitationConfig::CORA_CLASS_SIZES[c])
            .sum();
        assert_eq!(part1, 1412);
        let m = g.masks.as_ref().unwrap();
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (140, 500, 1000));
        let same = g
            .edges
            .iter()
            .filter(|&&(a, b)| g.labels[a] == g.labels[b])
            .count() as f64;
        let h = same / g.edges.len() as f64;
        assert!((h - 0.81).abs() < 0.03, "homophily {h}");
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = CitationConfig::cora_like().scaled(0.1);
        assert_eq!(cfg.generate(3).unwrap(), cfg.generate(3).unwrap());
        assert_ne!(cfg.generate(3).unwrap().edges, cfg.generate(4).unwrap().edges);
    }
}
