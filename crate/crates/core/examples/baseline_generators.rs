//! Every candidate generator in the same short pendulum run, side by side.

use explorler::envs::EnvId;
use explorler::harness::config::RunConfig;
use explorler::pipeline::{run_experiment, ExperimentConfig, Method};

fn main() -> explorler::Result<()> {
    let mut cfg = RunConfig::defaults(EnvId::Pendulum).experiment();
    cfg.pipeline.total_iterations = 20;
    cfg.ppo.steps_per_rollout = 512;

    println!("{:<15} {:>6} {:>6} {:>12} {:>10}", "method", "events", "swaps", "eval steps", "last best");
    for method in Method::ALL {
        let out = run_experiment(&ExperimentConfig { method, ..cfg.clone() }, 0)?;
        let swaps = out.events.iter().filter(|e| e.swapped).count();
        let last = out.events.last().map_or(f64::NAN, |e| e.best_mean_return);
        println!(
            "{:<15} {:>6} {:>6} {:>12} {:>10.2}",
            method.as_str(),
            out.events.len(),
            swaps,
            out.eval_env_steps,
            last
        );
    }
    Ok(())
}
