//! A few FGNN rounds between two clients, with the blend weights, the server
//! metric and the traffic of each round.

use asfgnn::experiment::{client_datasets, load_graph, ExpMode, ExperimentConfig};
use asfgnn::fgnn::{ClientConfig, FgnnConfig, Federation, Mode};
use asfgnn::secret::PayloadKind;

fn main() -> asfgnn::Result<()> {
    let mut exp = ExperimentConfig::new(ExpMode::Sfgnn);
    exp.dataset.scale = 0.3;
    exp.alpha = 0.8;
    let g = load_graph(&exp.dataset)?;
    let data = client_datasets(&g, &exp, 0)?;

    let cfg = FgnnConfig {
        mode: Mode::Sfgnn { js: true },
        rounds: 10,
        dim: 64,
        local_epochs: 1,
        optimizer: Default::default(),
        seed: 0,
        clients: vec![ClientConfig { depth: 2, lr: 0.01, l2: 5e-4, dropout: 0.0 }; 2],
    };
    let mut fed = Federation::new(data, &cfg)?;
    for _ in 0..cfg.rounds {
        let r = fed.step()?;
        println!(
            "round {:2}: M_t {:.3} val {:?} js {:?} loss {:?}",
            r.round,
            r.global_metric,
            r.per_client_metric.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            r.per_client_js.iter().map(|j| j.map(|v| format!("{v:.3}"))).collect::<Vec<_>>(),
            r.per_client_loss.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        );
    }
    let t = fed.transport();
    let weights = t.envelopes().iter().filter(|e| e.kind == PayloadKind::Weights).count();
    println!(
        "{} messages ({weights} carrying weights), {} bytes, {} shares",
        t.message_count(),
        t.bytes_sent(),
        t.shares_generated()
    );
    println!("discriminator size {}", fed.clients()[0].model.disc.num_params());
    Ok(())
}
