//! Plain PPO on the pendulum swing-up task.
//!
//! ```text
//! cargo run --release --example ppo_pendulum -- [iterations] [seed]
//! ```

use explorler::envs::EnvId;
use explorler::ppo::{PpoConfig, PpoTrainer};

fn main() -> explorler::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let mut trainer = PpoTrainer::new(PpoConfig::pendulum(), EnvId::Pendulum.make(), seed)?;
    for _ in 0..iterations {
        let rec = trainer.train_iteration()?;
        if let Some(ret) = rec.mean_episode_return {
            println!(
                "iter {:>4}  steps {:>7}  return {:>9.2}  value_loss {:>9.3}  entropy {:.3}",
                rec.iteration, rec.env_steps, ret, rec.value_loss, rec.entropy
            );
        }
    }
    Ok(())
}
