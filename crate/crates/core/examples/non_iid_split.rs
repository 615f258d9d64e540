//! Label-ratio, degree and label-group splits of the Cora-like graph.

use asfgnn::experiment::{client_datasets, load_graph, ExpMode, ExperimentConfig, SplitKind};
use asfgnn::fgnn::{js_divergence, LabelCounts};

fn main() -> asfgnn::Result<()> {
    let mut cfg = ExperimentConfig::new(ExpMode::Sfgnn);
    let g = load_graph(&cfg.dataset)?;
    println!("class sizes {:?}", g.class_counts());

    for alpha in [0.5, 0.6, 0.8, 1.0] {
        cfg.alpha = alpha;
        let clients = client_datasets(&g, &cfg, 0)?;
        let dists = clients
            .iter()
            .map(|c| LabelCounts::from_labels(c.graph.labels.iter().copied(), g.num_classes)?.distribution())
            .collect::<asfgnn::Result<Vec<_>>>()?;
        println!(
            "alpha {alpha}: sizes {:?}, JS between clients {:.3}",
            clients.iter().map(|c| c.graph.num_nodes).collect::<Vec<_>>(),
            js_divergence(&dists[0], &dists[1])?
        );
    }

    cfg.split = SplitKind::Degree;
    for c in client_datasets(&g, &cfg, 0)? {
        let mean_deg = (0..c.graph.num_nodes).map(|v| c.graph.degree(v)).sum::<usize>() as f64 / c.graph.num_nodes as f64;
        println!("degree split client {}: {} nodes, mean degree {mean_deg:.2}", c.client_id, c.graph.num_nodes);
    }

    cfg.split = SplitKind::LabelGroups;
    for n in 2..=5 {
        cfg.num_clients = n;
        let sizes: Vec<usize> = client_datasets(&g, &cfg, 0)?.iter().map(|c| c.graph.num_nodes).collect();
        println!("{n} label groups: {sizes:?}");
    }
    Ok(())
}
