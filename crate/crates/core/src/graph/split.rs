use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, Masks};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Label-ratio split parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub alpha: f64,
    pub part1_classes: Vec<usize>,
    pub part2_classes: Vec<usize>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(0.5..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} outside [0.5, 1.0]",
                self.alpha
            )));
        }
        let mut seen = vec![0u8; num_classes];
        for &c in self.part1_classes.iter().chain(&self.part2_classes) {
            if c >= num_classes {
                return Err(Error::InvalidArgument(format!("class {c} out of range")));
            }
            seen[c] += 1;
        }
        if seen.iter().any(|&s| s != 1) {
            return Err(Error::InvalidArgument(
                "part1 and part2 classes must partition the class set".into(),
            ));
        }
        Ok(())
    }
}

/// One client's private dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub graph: Graph,
    pub masks: Masks,
}

impl ClientDataset {
    pub fn new(client_id: usize, graph: Graph, masks: Masks) -> Result<Self> {
        masks.validate(graph.num_nodes)?;
        if masks.train.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "client {client_id} has an empty training mask"
            )));
        }
        Ok(ClientDataset {
            client_id,
            graph,
            masks,
        })
    }

    /// Uses the masks already attached to `graph`.
    pub fn from_graph(client_id: usize, graph: Graph) -> Result<Self> {
        let masks = graph
            .masks
            .clone()
            .ok_or_else(|| Error::Dataset("graph carries no masks".into()))?;
        Self::new(client_id, graph, masks)
    }

    /// Pools several clients into one dataset (disjoint union, masks kept).
    pub fn pool(clients: &[ClientDataset]) -> Result<ClientDataset> {
        let (first, rest) = clients
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("nothing to pool".into()))?;
        let mut g = first.graph.clone();
        g.masks = Some(first.masks.clone());
        for c in rest {
            let mut other = c.graph.clone();
            other.masks = Some(c.masks.clone());
            g = g.disjoint_union(&other)?;
        }
        ClientDataset::from_graph(0, g)
    }
}

/// Train/val/test fractions used when masks are re-sampled after a split.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MaskRatios {
    train: f64,
    val: f64,
    test: f64,
}

impl MaskRatios {
    /// The public Planetoid split of Cora: 140 / 500 / 1000 of 2708 nodes.
    const PLANETOID: MaskRatios = MaskRatios {
        train: 140.0 / 2708.0,
        val: 500.0 / 2708.0,
        test: 1000.0 / 2708.0,
    };

    fn from_graphs(graphs: &[&Graph]) -> MaskRatios {
        let mut n = 0usize;
        let (mut tr, mut va, mut te) = (0usize, 0usize, 0usize);
        for g in graphs {
            match &g.masks {
                Some(m) => {
                    n += g.num_nodes;
                    tr += m.train.len();
                    va += m.val.len();
                    te += m.test.len();
                }
                None => return Self::PLANETOID,
            }
        }
        if n == 0 || tr == 0 {
            return Self::PLANETOID;
        }
        let n = n as f64;
        MaskRatios {
            train: tr as f64 / n,
            val: va as f64 / n,
            test: te as f64 / n,
        }
    }

    fn sample(&self, n: usize, rng: &mut impl Rng) -> Masks {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(rng);
        let take = |f: f64| ((n as f64) * f).round() as usize;
        let tr = take(self.train).max(1).min(n);
        let va = take(self.val).min(n - tr);
        let te = take(self.test).min(n - tr - va);
        let sorted = |s: &[usize]| {
            let mut v = s.to_vec();
            v.sort_unstable();
            v
        };
        Masks {
            train: sorted(&ids[..tr]),
            val: sorted(&ids[tr..tr + va]),
            test: sorted(&ids[tr + va..tr + va + te]),
        }
    }
}

fn make_client(
    pool: &Graph,
    mut nodes: Vec<usize>,
    ratios: MaskRatios,
    master: u64,
    client_id: usize,
) -> Result<ClientDataset> {
    nodes.sort_unstable();
    let mut graph = pool.induced(&nodes)?;
    graph.masks = None;
    let mut rng = seed::rng(master, Stream::Masks, &[client_id as u64]);
    let masks = ratios.sample(graph.num_nodes, &mut rng);
    ClientDataset::new(client_id, graph, masks)
}

/// Two-client label-ratio split.
///
/// `g1` holds the part-1 classes (N₁ nodes), `g2` the part-2 classes
/// (N₂ nodes). Each part is shuffled with the split seed; its owner (client A
/// for part 1, client B for part 2) takes ⌊α·N_p⌋ nodes and the other client
/// takes the next ⌊(1−α)·N_p⌋. Edges between the two parts do not exist in
/// the inputs, and client graphs are induced subgraphs, so neighborhoods never
/// cross a client boundary. Masks are re-sampled per client with the
/// proportions of the source masks.
pub fn split_by_label_ratio(g1: &Graph, g2: &Graph, spec: &SplitSpec) -> Result<Vec<ClientDataset>> {
    let num_classes = g1.num_classes;
    if g2.num_classes != num_classes {
        return Err(Error::Shape("parts disagree on class count".into()));
    }
    spec.validate(num_classes)?;
    let check = |g: &Graph, classes: &[usize], name: &str| -> Result<()> {
        match g.labels.iter().find(|l| !classes.contains(l)) {
            Some(l) => Err(Error::InvalidArgument(format!(
                "{name} contains label {l} outside its class set"
            ))),
            None => Ok(()),
        }
    };
    check(g1, &spec.part1_classes, "part 1")?;
    check(g2, &spec.part2_classes, "part 2")?;

    let ratios = MaskRatios::from_graphs(&[g1, g2]);
    let pool = g1.disjoint_union(g2)?;
    let off = g1.num_nodes;

    let mut client_a = Vec::new();
    let mut client_b = Vec::new();
    for (part, (n, shift)) in [(g1.num_nodes, 0), (g2.num_nodes, off)].into_iter().enumerate() {
        let own = floor_count(spec.alpha * n as f64);
        let other = floor_count((1.0 - spec.alpha) * n as f64);
        if own + other > n {
            return Err(Error::InvalidArgument(format!(
                "part {} has {n} nodes, {} requested",
                part + 1,
                own + other
            )));
        }
        let mut ids: Vec<usize> = (shift..shift + n).collect();
        ids.shuffle(&mut seed::rng(spec.seed, Stream::Split, &[part as u64]));
        let (owner, guest) = if part == 0 {
            (&mut client_a, &mut client_b)
        } else {
            (&mut client_b, &mut client_a)
        };
        owner.extend_from_slice(&ids[..own]);
        guest.extend_from_slice(&ids[own..own + other]);
    }

    Ok(vec![
        make_client(&pool, client_a, ratios, spec.seed, 0)?,
        make_client(&pool, client_b, ratios, spec.seed, 1)?,
    ])
}

/// `⌊x⌋`, tolerant of representation error such as `(1 − 0.8)·10 = 1.999…`.
fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Splits nodes by degree: `degree <= threshold` goes to the first part.
pub fn split_by_degree(g: &Graph, threshold: usize) -> Result<(Graph, Graph)> {
    let (low, high): (Vec<usize>, Vec<usize>) =
        (0..g.num_nodes).partition(|&v| g.degree(v) <= threshold);
    if low.is_empty() || high.is_empty() {
        log::warn!(
            "degree split at {threshold} leaves an empty part ({} / {})",
            low.len(),
            high.len()
        );
    }
    Ok((g.induced(&low)?, g.induced(&high)?))
}

/// Subgraph induced by the nodes whose label is in `classes`.
pub fn part_by_classes(g: &Graph, classes: &[usize]) -> Result<Graph> {
    let nodes: Vec<usize> = (0..g.num_nodes)
        .filter(|&v| classes.contains(&g.labels[v]))
        .collect();
    g.induced(&nodes)
}

/// Multi-client label split: the class set is cut into `num_clients`
/// contiguous, near-equal groups and client `i` receives every node of group
/// `i`.
pub fn split_by_label_groups(g: &Graph, num_clients: usize, seed: u64) -> Result<Vec<ClientDataset>> {
    if num_clients == 0 || num_clients > g.num_classes {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} classes among {num_clients} clients",
            g.num_classes
        )));
    }
    let ratios = MaskRatios::from_graphs(&[g]);
    let base = g.num_classes / num_clients;
    let extra = g.num_classes % num_clients;
    let mut start = 0;
    let mut out = Vec::with_capacity(num_clients);
    for i in 0..num_clients {
        let len = base + usize::from(i < extra);
        let classes: Vec<usize> = (start..start + len).collect();
        start += len;
        let nodes = (0..g.num_nodes)
            .filter(|&v| classes.contains(&g.labels[v]))
            .collect();
        out.push(make_client(g, nodes, ratios, seed, i)?);
    }
    Ok(out)
}

/// Combined Non-IID label + graph split: client A receives the low-degree
/// nodes of the part-1 classes, client B the high-degree nodes of the part-2
/// classes. Degrees are measured in `g`.
pub fn split_label_and_degree(
    g: &Graph,
    threshold: usize,
    part1_classes: &[usize],
    part2_classes: &[usize],
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    let ratios = MaskRatios::from_graphs(&[g]);
    let a = (0..g.num_nodes)
        .filter(|&v| g.degree(v) <= threshold && part1_classes.contains(&g.labels[v]))
        .collect();
    let b = (0..g.num_nodes)
        .filter(|&v| g.degree(v) > threshold && part2_classes.contains(&g.labels[v]))
        .collect();
    Ok(vec![
        make_client(g, a, ratios, seed, 0)?,
        make_client(g, b, ratios, seed, 1)?,
    ])
}

/// Graph Non-IID split: client A receives the nodes with
/// `degree <= threshold`, client B the rest. Masks are re-sampled per client.
pub fn split_degree_clients(g: &Graph, threshold: usize, seed: u64) -> Result<Vec<ClientDataset>> {
    let ratios = MaskRatios::from_graphs(&[g]);
    let (low, high): (Vec<usize>, Vec<usize>) = (0..g.num_nodes).partition(|&v| g.degree(v) <= threshold);
    Ok(vec![
        make_client(g, low, ratios, seed, 0)?,
        make_client(g, high, ratios, seed, 1)?,
    ])
}

/// Median node degree (lower median).
pub fn median_degree(g: &Graph) -> usize {
    let mut d: Vec<usize> = (0..g.num_nodes).map(|v| g.degree(v)).collect();
    d.sort_unstable();
    d.get(d.len().saturating_sub(1) / 2).copied().unwrap_or(0)
}
