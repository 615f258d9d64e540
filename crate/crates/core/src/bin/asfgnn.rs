use std::path::PathBuf;
use std::process::ExitCode;

use asfgnn::experiment::{run, ExpMode, ExperimentConfig, RunResult, Tuner};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Automated separated-federated GNN experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<ExpMode>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        clients: Option<usize>,
        #[arg(long)]
        tuner: Option<Tuner>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Replaces the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> asfgnn::Result<()> {
    let Cmd::Run {
        config,
        mode,
        alpha,
        clients,
        tuner,
        budget,
        rounds,
        seed,
        out,
    } = cli.cmd;
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(m) = mode {
        cfg.mode = m;
        if m == ExpMode::Asfgnn && tuner.is_none() {
            cfg.tuner = Tuner::Bo;
        }
    }
    cfg.alpha = alpha.unwrap_or(cfg.alpha);
    cfg.num_clients = clients.unwrap_or(cfg.num_clients);
    cfg.tuner = tuner.unwrap_or(cfg.tuner);
    cfg.budget = budget.unwrap_or(cfg.budget);
    cfg.rounds = rounds.unwrap_or(cfg.rounds);
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if out.is_some() {
        cfg.out = out;
    }
    match run(&cfg)? {
        RunResult::Single(r) => {
            for s in &r.runs {
                println!(
                    "seed {}: M(theta)={:.4} test={:.4} best trial {} of {} round {}",
                    s.seed, s.best_value, s.test_accuracy, s.best_trial, s.trials, s.best_round
                );
            }
            println!(
                "{} mean test accuracy {:.4} ± {:.4} over {} seed(s), {} trials, {:.1}s tuning",
                r.mode.name(),
                r.mean_test_accuracy,
                r.std_test_accuracy,
                r.runs.len(),
                r.trial_count,
                r.tuning_wall_time_s
            );
        }
        RunResult::Sweep(t) => {
            for row in &t.rows {
                println!(
                    "{:?}={}: test {:.4} ± {:.4} (M {:.4})",
                    t.variable, row.value, row.mean_test_accuracy, row.std_test_accuracy, row.mean_best_value
                );
            }
        }
    }
    if let Some(d) = &cfg.out {
        println!("wrote {}", d.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
