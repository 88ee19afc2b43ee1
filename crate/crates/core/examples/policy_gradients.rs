//! The clipped surrogate and its gradient on a hand-built minibatch, with a
//! central-difference check on one parameter.

use explorler::nn::{gaussian, ActorCritic};
use explorler::ppo::{clipped_surrogate, ppo_loss, ppo_loss_and_grad, MiniBatch, PpoConfig};
use explorler::seeding::{stream_rng, Stream};

fn main() -> explorler::Result<()> {
    let eps = 0.2;
    println!("ratio  adv   objective  clipped");
    for (ratio, adv) in [(1.1, 1.0), (1.5, 1.0), (0.5, 1.0), (0.5, -1.0), (1.5, -1.0)] {
        let (obj, _) = clipped_surrogate(ratio, adv, eps);
        let clipped = (ratio < 1.0 - eps && adv < 0.0) || (ratio > 1.0 + eps && adv > 0.0);
        println!("{ratio:<6} {adv:<5} {obj:<10.3} {clipped}");
    }

    let cfg = PpoConfig {
        hidden: vec![8, 8],
        ..PpoConfig::pendulum()
    };
    let nets = ActorCritic::new(3, &cfg.hidden, vec![-2.0], vec![2.0], &mut stream_rng(1, Stream::PolicyInit));
    let mut batch = MiniBatch::default();
    for i in 0..16 {
        let t = i as f64 * 0.4;
        let obs = vec![t.cos(), t.sin(), 0.1 * i as f64 - 0.8];
        let action = vec![(t * 1.7).sin()];
        let (mean, log_std) = nets.policy.forward(&obs)?;
        // Pretend the data came from a slightly different policy.
        let old = gaussian::log_prob(&mean, &log_std, &action)? - 0.05 * (t * 3.0).sin();
        batch.obs.push(obs);
        batch.actions.push(action);
        batch.old_log_probs.push(old);
        batch.advantages.push(t.cos());
        batch.returns.push(-t);
    }

    let (terms, grads) = ppo_loss_and_grad(&nets, &batch, &cfg)?;
    println!(
        "loss {:.6} (policy {:.6}, value {:.6}, entropy {:.6})",
        terms.total, terms.policy, terms.value, terms.entropy
    );

    let flat = nets.flatten();
    let analytic = grads.flatten();
    // Probe the coordinate with the largest gradient; many sit behind dead ReLUs.
    let k = (0..flat.len())
        .max_by(|&a, &b| analytic.values()[a].abs().total_cmp(&analytic.values()[b].abs()))
        .unwrap_or(0);
    let h = 1e-6;
    let loss_with = |delta: f64| -> explorler::Result<f64> {
        let mut values = flat.values().to_vec();
        values[k] += delta;
        let mut probe = nets.clone();
        probe.load_flat(&flat.with_values(values)?)?;
        Ok(ppo_loss(&probe, &batch, &cfg)?.total)
    };
    let numeric = (loss_with(h)? - loss_with(-h)?) / (2.0 * h);
    println!(
        "parameter {k} of {}: analytic {:.9}, central difference {:.9}",
        flat.len(),
        analytic.values()[k],
        numeric
    );
    Ok(())
}
