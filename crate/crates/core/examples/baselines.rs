//! SFGNN with and without JS against the FL, SP and CM baselines at fixed
//! hyper-parameters on a reduced Cora-like graph.

use asfgnn::experiment::{run_experiment, ExpMode, ExperimentConfig, Tuner};

fn main() -> asfgnn::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(Ok(1.0), |s| s.parse()).expect("alpha");
    for (mode, js) in [
        (ExpMode::Sfgnn, true),
        (ExpMode::Sfgnn, false),
        (ExpMode::Fl, false),
        (ExpMode::Sp, false),
        (ExpMode::Cm, false),
    ] {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.dataset.scale = 0.5;
        cfg.alpha = alpha;
        cfg.tuner = Tuner::Fixed;
        cfg.rounds = 60;
        cfg.js = js;
        cfg.seeds = vec![0, 1];
        let r = run_experiment(&cfg)?.report;
        println!(
            "{:5}{:8} test {:.4} ± {:.4}  (val {:.4})",
            mode.name(),
            if mode == ExpMode::Sfgnn && !js { " -js" } else { "" },
            r.mean_test_accuracy,
            r.std_test_accuracy,
            r.mean_best_value
        );
    }
    Ok(())
}
