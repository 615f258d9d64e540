//! Separated GraphSAGE encoder on a small generated citation graph.

use asfgnn::graph::synthetic::CitationConfig;
use asfgnn::sgnn::{sgnn_forward, SgnnParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> asfgnn::Result<()> {
    let g = CitationConfig::cora_like().scaled(0.1).generate(1)?;
    println!("{} nodes, {} edges, {} features", g.num_nodes, g.edges.len(), g.num_features());

    for depth in 1..=3 {
        let params = SgnnParams::new(g.num_features(), 32, depth, &mut ChaCha8Rng::seed_from_u64(0))?;
        let emb = sgnn_forward(&g, &params)?;
        let norms: Vec<f64> = emb.h.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let unit = norms.iter().filter(|n| (*n - 1.0).abs() < 1e-9).count();
        println!(
            "depth {depth}: {} params, {}x{} embeddings, {unit} unit rows",
            params.num_params(),
            emb.h.nrows(),
            emb.h.ncols()
        );
    }
    Ok(())
}
