//! On-policy trajectory collection and generalized advantage estimation.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::nn::{ActionMode, GaussianPolicy, ValueNet};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Unclipped sampled action.
    pub action: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// V of the observation following the last transition.
    pub bootstrap_value: f64,
}

/// A training episode that finished during collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeEnd {
    /// Index within the rollout of the episode's final transition.
    pub step: usize,
    pub episode_return: f64,
    pub length: usize,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Computes advantages and returns in place; see [`compute_gae`].
    pub fn finish(&mut self, gamma: f64, lam: f64) -> Result<()> {
        let (adv, ret) = compute_gae(self, gamma, lam)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    /// Rescales advantages to zero mean and unit standard deviation.
    pub fn normalize_advantages(&mut self) {
        normalize(&mut self.advantages);
    }

    /// One row per transition.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (obs_dim, act_dim) = self
            .transitions
            .first()
            .map(|t| (t.obs.len(), t.action.len()))
            .unwrap_or((0, 0));
        let mut header = vec!["step".to_string()];
        header.extend((0..obs_dim).map(|i| format!("obs_{i}")));
        header.extend((0..act_dim).map(|i| format!("action_{i}")));
        header.extend(
            ["reward", "done", "log_prob", "value", "advantage", "return"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.transitions.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(t.obs.iter().map(|v| v.to_string()));
            row.extend(t.action.iter().map(|v| v.to_string()));
            row.push(t.reward.to_string());
            row.push((t.done as u8).to_string());
            row.push(t.log_prob.to_string());
            row.push(t.value.to_string());
            row.push(self.advantages.get(i).map(|v| v.to_string()).unwrap_or_default());
            row.push(self.returns.get(i).map(|v| v.to_string()).unwrap_or_default());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std < 1e-12 {
        values.iter_mut().for_each(|v| *v -= mean);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// Keeps an environment alive across rollouts so episodes may span
/// iteration boundaries, the way a persistent vectorized env would.
pub struct EnvRunner {
    env: Box<dyn Env>,
    obs: Vec<f64>,
    episode_return: f64,
    episode_len: usize,
    episode_seeds: rand_chacha::ChaCha8Rng,
}

impl EnvRunner {
    pub fn new(mut env: Box<dyn Env>, mut episode_seeds: rand_chacha::ChaCha8Rng) -> Self {
        let obs = env.reset(episode_seeds.random());
        Self {
            env,
            obs,
            episode_return: 0.0,
            episode_len: 0,
            episode_seeds,
        }
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    /// Collects exactly `n_steps` transitions under `policy`, resetting the
    /// environment whenever an episode ends.
    pub fn collect_rollout<R: Rng + ?Sized>(
        &mut self,
        policy: &GaussianPolicy,
        value: &ValueNet,
        n_steps: usize,
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<(RolloutBuffer, Vec<EpisodeEnd>)> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        let diverged = |what: &str| Error::Diverged {
            message: format!("non-finite {what} during collection"),
            checksum: policy.flatten().checksum(),
        };
        let mut buffer = RolloutBuffer {
            transitions: Vec::with_capacity(n_steps),
            ..Default::default()
        };
        let mut finished = Vec::new();
        for step in 0..n_steps {
            let v = value.value(&self.obs)?;
            if !v.is_finite() {
                return Err(diverged("value estimate"));
            }
            let sample = match policy.act(&self.obs, mode, rng) {
                Err(Error::NonFinite(_)) => return Err(diverged("policy output")),
                other => other?,
            };
            let result = self.env.step(&sample.clipped)?;
            self.episode_return += result.reward;
            self.episode_len += 1;
            buffer.transitions.push(Transition {
                obs: std::mem::replace(&mut self.obs, result.observation),
                action: sample.raw,
                reward: result.reward,
                done: result.done,
                log_prob: sample.log_prob,
                value: v,
            });
            if result.done {
                finished.push(EpisodeEnd {
                    step,
                    episode_return: self.episode_return,
                    length: self.episode_len,
                });
                self.episode_return = 0.0;
                self.episode_len = 0;
                self.obs = self.env.reset(self.episode_seeds.random());
            }
        }
        buffer.bootstrap_value = value.value(&self.obs)?;
        if !buffer.bootstrap_value.is_finite() {
            return Err(diverged("bootstrap value"));
        }
        Ok((buffer, finished))
    }
}

/// Backward GAE recursion
/// `A_t = δ_t + γλ(1−done_t)A_{t+1}`, `δ_t = r_t + γ(1−done_t)V_{t+1} − V_t`,
/// with `V_T` the stored bootstrap value. Returns `(advantages, A_t + V_t)`.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lam: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if buffer.is_empty() {
        return Err(Error::Empty("rollout buffer"));
    }
    if !(0.0..1.0).contains(&gamma) || !(0.0..=1.0).contains(&lam) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be in [0,1) and lambda in [0,1], got {gamma}, {lam}"
        )));
    }
    let n = buffer.len();
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = buffer.bootstrap_value;
    for t in (0..n).rev() {
        let tr = &buffer.transitions[t];
        let live = if tr.done { 0.0 } else { 1.0 };
        let delta = tr.reward + gamma * live * next_value - tr.value;
        next_adv = delta + gamma * lam * live * next_adv;
        advantages[t] = next_adv;
        next_value = tr.value;
    }
    let returns = advantages
        .iter()
        .zip(&buffer.transitions)
        .map(|(a, t)| a + t.value)
        .collect();
    Ok((advantages, returns))
}

/// Shuffled index batches; a trailing partial batch is dropped.
pub fn minibatch_iter<R: Rng + ?Sized>(
    len: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size > len {
        return Err(Error::InvalidArgument(format!(
            "batch size {batch_size} does not fit a buffer of {len}"
        )));
    }
    let mut indices: Vec<usize> = (0..len).collect();
    indices.shuffle(rng);
    Ok(indices
        .chunks_exact(batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvId, Pendulum};
    use crate::nn::ActorCritic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn buffer(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64) -> RolloutBuffer {
        RolloutBuffer {
            transitions: rewards
                .iter()
                .zip(values)
                .zip(dones)
                .map(|((&reward, &value), &done)| Transition {
                    obs: vec![],
                    action: vec![],
                    reward,
                    done,
                    log_prob: 0.0,
                    value,
                })
                .collect(),
            bootstrap_value: bootstrap,
            ..Default::default()
        }
    }

    #[test]
    fn zero_rewards_zero_advantages() {
        let b = buffer(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0);
        let (adv, _) = compute_gae(&b, 0.9, 0.95).unwrap();
        assert!(adv.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn hand_recursion() {
        let b = buffer(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 0.0);
        let (adv, ret) = compute_gae(&b, 0.5, 0.5).unwrap();
        assert_eq!(adv, vec![1.25, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let b = buffer(&[0.5, -1.0, 2.0], &[0.1, 0.3, -0.2], &[false, false, false], 0.7);
        let (adv, _) = compute_gae(&b, 0.9, 0.0).unwrap();
        let deltas = [0.5 + 0.9 * 0.3 - 0.1, -1.0 + 0.9 * -0.2 - 0.3, 2.0 + 0.9 * 0.7 + 0.2];
        for (a, d) in adv.iter().zip(deltas) {
            assert_eq!(*a, d);
        }
    }

    #[test]
    fn empty_buffer_rejected() {
        assert!(matches!(compute_gae(&RolloutBuffer::default(), 0.9, 0.9), Err(Error::Empty(_))));
    }

    #[test]
    fn normalization_stats() {
        let mut v: Vec<f64> = (0..37).map(|i| (i as f64 * 1.7).sin() * 40.0 + 3.0).collect();
        normalize(&mut v);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn minibatches() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = minibatch_iter(4, 2, &mut rng).unwrap();
        assert_eq!(b.len(), 2);
        let mut all: Vec<_> = b.concat();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let b = minibatch_iter(5, 2, &mut rng).unwrap();
        assert_eq!(b.len(), 2);
        let mut all = b.concat();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 4);

        let a = minibatch_iter(64, 8, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let c = minibatch_iter(64, 8, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, c);
        assert!(minibatch_iter(3, 4, &mut rng).is_err());
    }

    fn runner(seed: u64) -> (EnvRunner, ActorCritic) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ac = ActorCritic::new(3, &[8, 8], vec![-2.0], vec![2.0], &mut rng);
        (EnvRunner::new(EnvId::Pendulum.make(), ChaCha8Rng::seed_from_u64(seed + 1)), ac)
    }

    #[test]
    fn single_step_rollout() {
        let (mut r, ac) = runner(1);
        let s0 = r.observation().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (b, _) = r
            .collect_rollout(&ac.policy, &ac.value, 1, ActionMode::Stochastic, &mut rng)
            .unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.transitions[0].value, ac.value.value(&s0).unwrap());
        assert!(r
            .collect_rollout(&ac.policy, &ac.value, 0, ActionMode::Stochastic, &mut rng)
            .is_err());
    }

    #[test]
    fn rollout_is_reproducible_and_resets() {
        let collect = || {
            let (mut r, ac) = runner(3);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            r.collect_rollout(&ac.policy, &ac.value, 450, ActionMode::Stochastic, &mut rng)
                .unwrap()
        };
        let (a, ends) = collect();
        let (b, _) = collect();
        assert_eq!(a, b);
        assert_eq!(ends.len(), 2);
        assert_eq!(ends[0].step, 199);
        assert_eq!(ends[0].length, 200);
        assert!(a.transitions[199].done && !a.transitions[200].done);
    }

    #[test]
    fn equilibrium_with_zero_policy_earns_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ac = ActorCritic::new(3, &[8, 8], vec![-2.0], vec![2.0], &mut rng);
        ac.policy.mean_net = ac.policy.mean_net.zeros_like();
        ac.policy.log_std = vec![-20.0];
        // Start at rest in the upright position; the near-zero-variance policy holds it.
        let mut r = EnvRunner::new(Box::new(Pendulum::default()), ChaCha8Rng::seed_from_u64(0));
        r.env = Box::new(Pendulum::with_state(0.0, 0.0));
        r.obs = Pendulum::with_state(0.0, 0.0).observation();
        let (b, _) = r
            .collect_rollout(&ac.policy, &ac.value, 50, ActionMode::Stochastic, &mut rng)
            .unwrap();
        assert!(b.transitions.iter().all(|t| t.reward.abs() < 1e-12));
    }
}
