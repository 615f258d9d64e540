//! The automated pipeline end to end: SFGNN tuned by Bayesian optimization,
//! with the report files written to a directory (first argument, default
//! `asfgnn-out`).

use asfgnn::experiment::{emit_report, run_asfgnn, ExpMode, ExperimentConfig};

fn main() -> asfgnn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = std::env::args().nth(1).unwrap_or_else(|| "asfgnn-out".into());

    let mut cfg = ExperimentConfig::new(ExpMode::Asfgnn);
    cfg.dataset.scale = 0.3;
    cfg.rounds = 40;
    cfg.budget = 8;
    cfg.n0 = 4;
    let out = run_asfgnn(&cfg)?;
    let run = &out.report.runs[0];
    println!("best M(theta) {:.4} at trial {}, test accuracy {:.4}", run.best_value, run.best_trial, run.test_accuracy);
    for (i, c) in run.clients.iter().enumerate() {
        println!("client {i}: {c:?}");
    }
    println!("hidden {}", run.hidden);
    emit_report(&out, &dir)?;
    println!("report written to {dir}");
    Ok(())
}
