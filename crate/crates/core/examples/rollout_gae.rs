//! Collect one rollout on the pendulum with a freshly initialised policy and
//! look at the advantages GAE assigns to it.
//!
//! ```text
//! cargo run --release --example rollout_gae -- [steps] [seed]
//! ```

use explorler::envs::EnvId;
use explorler::nn::{ActionMode, ActorCritic};
use explorler::rollout::EnvRunner;
use explorler::seeding::{stream_rng, Stream};

fn main() -> explorler::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(600);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let env = EnvId::Pendulum.make();
    let nets = ActorCritic::new(
        env.obs_dim(),
        &[64, 64],
        env.action_low(),
        env.action_high(),
        &mut stream_rng(seed, Stream::PolicyInit),
    );
    let mut runner = EnvRunner::new(env, stream_rng(seed, Stream::Env));
    let (mut buffer, episodes) = runner.collect_rollout(
        &nets.policy,
        &nets.value,
        steps,
        ActionMode::Stochastic,
        &mut stream_rng(seed, Stream::PolicySampling),
    )?;
    buffer.finish(0.99, 0.95)?;

    for ep in &episodes {
        println!("episode ended at step {:>4}: return {:>9.2} over {} steps", ep.step, ep.episode_return, ep.length);
    }
    let n = buffer.len() as f64;
    let mean_adv = buffer.advantages.iter().sum::<f64>() / n;
    let mean_ret = buffer.returns.iter().sum::<f64>() / n;
    println!("{} transitions, mean advantage {mean_adv:.3}, mean return target {mean_ret:.3}", buffer.len());
    println!("first five advantages: {:?}", &buffer.advantages[..5.min(buffer.advantages.len())]);
    Ok(())
}
