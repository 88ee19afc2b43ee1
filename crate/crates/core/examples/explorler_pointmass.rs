//! ExploRLer against plain PPO on the two-attractor point-mass task, with
//! the event log of each particle search.
//!
//! ```text
//! cargo run --release --example explorler_pointmass -- [seed]
//! ```

use explorler::envs::EnvId;
use explorler::harness::config::RunConfig;
use explorler::harness::run::final_window_mean;
use explorler::pipeline::{run_baseline_pipeline, run_explorler, Method};

fn main() -> explorler::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let cfg = RunConfig::defaults(EnvId::PointMass);
    let exp = cfg.experiment();

    let ppo = run_baseline_pipeline(&exp, Method::None, seed)?;
    let ours = run_explorler(&exp, seed)?;

    for e in &ours.events {
        println!(
            "iteration {:>3}: best {:>8.2} ({:?}) incumbent {:>8.2} swapped {}",
            e.iteration,
            e.best_mean_return,
            e.best_provenance,
            e.incumbent_mean_return.unwrap_or(f64::NAN),
            e.swapped
        );
    }
    let w = cfg.smoothing_window;
    println!(
        "final-window return: ppo {:.2}, explorler {:.2} ({} extra evaluation steps)",
        final_window_mean(&ppo.curve, w)?,
        final_window_mean(&ours.curve, w)?,
        ours.eval_env_steps
    );
    Ok(())
}
