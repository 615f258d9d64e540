//! Bayesian optimization against grid search on a synthetic objective over
//! the shared 800-point hyper-parameter grid.

use asfgnn::bayes::{bayes_opt, best_trial, grid_search, BoConfig, Point, SearchSpace};

fn main() -> asfgnn::Result<()> {
    let space = SearchSpace::shared();
    let target = [0.8, 0.3, 0.25, 0.6, 0.4];
    let f = |p: &Point| -> asfgnn::Result<f64> {
        let u = space.encode(p)?;
        Ok(1.0 - u.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
    };

    let grid = grid_search(&space, space.size(), f)?;
    let top = best_trial(&grid).expect("non-empty grid");
    println!("grid: best {:.4} at trial {} of {}", top.value, top.trial_index, grid.len());

    for seed in 0..5 {
        let cfg = BoConfig { budget: 40, seed, ..BoConfig::default() };
        let trials = bayes_opt(&space, &cfg, &[], f, |_| Ok(()))?;
        let best = best_trial(&trials).expect("non-empty run");
        let first = trials.iter().position(|t| t.value >= top.value - 0.01);
        println!(
            "bo seed {seed}: best {:.4} at trial {}, within 0.01 after {:?} trials, theta {:?}",
            best.value, best.trial_index, first.map(|k| k + 1), best.theta
        );
    }
    Ok(())
}
