//! Clipped-surrogate PPO learner with epoch checkpoints.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::nn::{gaussian, ActionMode, ActorCritic, FlatParams};
use crate::rollout::{minibatch_iter, EnvRunner, EpisodeEnd, RolloutBuffer};
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub steps_per_rollout: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub init_log_std: f64,
    pub hidden: Vec<usize>,
}

impl PpoConfig {
    /// Pendulum row of the reference hyperparameter table, single env.
    pub fn pendulum() -> Self {
        Self {
            learning_rate: 1e-3,
            clip_epsilon: 0.2,
            steps_per_rollout: 1024,
            batch_size: 64,
            n_epochs: 10,
            gamma: 0.9,
            gae_lambda: 0.95,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            init_log_std: 0.0,
            hidden: vec![64, 64],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: format!("ppo.{key}"),
                message: message.to_string(),
            })
        };
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be a non-negative number");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon", "must lie in (0, 1)");
        }
        if self.steps_per_rollout == 0 {
            return bad("steps_per_rollout", "must be at least 1");
        }
        if self.batch_size == 0 || self.batch_size > self.steps_per_rollout {
            return bad("batch_size", "must be in 1..=steps_per_rollout");
        }
        if self.n_epochs == 0 {
            return bad("n_epochs", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", "must lie in [0, 1]");
        }
        if !(self.entropy_coef >= 0.0) {
            return bad("entropy_coef", "must be non-negative");
        }
        if !(self.value_coef >= 0.0) {
            return bad("value_coef", "must be non-negative");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm", "must be positive");
        }
        if !self.init_log_std.is_finite() {
            return bad("init_log_std", "must be finite");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", "needs at least one non-zero layer width");
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = crate::nn::flat::norm(grad);
    if norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// `min(r·A, clip(r, 1−ε, 1+ε)·A)` and its derivative in `r`. The
/// unclipped branch wins ties, so the derivative is `A` inside the band.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_epsilon: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Training samples selected for one gradient step.
#[derive(Debug, Clone, Default)]
pub struct MiniBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl MiniBatch {
    pub fn gather(buffer: &RolloutBuffer, indices: &[usize]) -> Self {
        let mut b = MiniBatch::default();
        for &i in indices {
            let t = &buffer.transitions[i];
            b.obs.push(t.obs.clone());
            b.actions.push(t.action.clone());
            b.old_log_probs.push(t.log_prob);
            b.advantages.push(buffer.advantages[i]);
            b.returns.push(buffer.returns[i]);
        }
        b
    }

    pub fn whole(buffer: &RolloutBuffer) -> Self {
        Self::gather(buffer, &(0..buffer.len()).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// PPO objective terms without gradients.
pub fn ppo_loss(nets: &ActorCritic, batch: &MiniBatch, cfg: &PpoConfig) -> Result<LossTerms> {
    evaluate(nets, batch, cfg, None)
}

/// PPO objective terms and the gradient of `total` with respect to every
/// parameter, returned in actor-critic shape.
pub fn ppo_loss_and_grad(
    nets: &ActorCritic,
    batch: &MiniBatch,
    cfg: &PpoConfig,
) -> Result<(LossTerms, ActorCritic)> {
    let mut grads = nets.zeros_like();
    let terms = evaluate(nets, batch, cfg, Some(&mut grads))?;
    Ok((terms, grads))
}

fn evaluate(
    nets: &ActorCritic,
    batch: &MiniBatch,
    cfg: &PpoConfig,
    mut grads: Option<&mut ActorCritic>,
) -> Result<LossTerms> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let n = batch.len() as f64;
    let log_std = &nets.policy.log_std;
    let mut policy_term = 0.0;
    let mut value_term = 0.0;
    let mut d_mean = vec![0.0; log_std.len()];
    for i in 0..batch.len() {
        let obs = &batch.obs[i];
        let action = &batch.actions[i];
        let trace = nets.policy.mean_net.forward_traced(obs)?;
        let mean = trace.output();
        let log_prob = gaussian::log_prob(mean, log_std, action)?;
        let ratio = (log_prob - batch.old_log_probs[i]).exp();
        if !ratio.is_finite() {
            return Err(Error::Diverged {
                message: format!("importance ratio {ratio} at sample {i}"),
                checksum: nets.policy.flatten().checksum(),
            });
        }
        let (objective, d_ratio) = clipped_surrogate(ratio, batch.advantages[i], cfg.clip_epsilon);
        policy_term -= objective / n;

        let v_trace = nets.value.net.forward_traced(obs)?;
        let err = v_trace.output()[0] - batch.returns[i];
        value_term += err * err / n;

        if let Some(g) = grads.as_deref_mut() {
            // d(policy_term)/d(log_prob) = −(dobj/dr)·r / n
            let upstream = -d_ratio * ratio / n;
            if upstream != 0.0 {
                d_mean.iter_mut().for_each(|d| *d = 0.0);
                gaussian::log_prob_backward(
                    mean,
                    log_std,
                    action,
                    upstream,
                    &mut d_mean,
                    &mut g.policy.log_std,
                );
                nets.policy
                    .mean_net
                    .backward(&trace, &d_mean, &mut g.policy.mean_net);
            }
            let d_value = cfg.value_coef * 2.0 * err / n;
            nets.value.net.backward(&v_trace, &[d_value], &mut g.value.net);
        }
    }
    let entropy = gaussian::entropy(log_std)?;
    if let Some(g) = grads {
        g.policy
            .log_std
            .iter_mut()
            .for_each(|d| *d -= cfg.entropy_coef);
    }
    Ok(LossTerms {
        total: policy_term + cfg.value_coef * value_term - cfg.entropy_coef * entropy,
        policy: policy_term,
        value: value_term,
        entropy,
    })
}

/// A policy-subspace snapshot taken at the end of a training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: FlatParams,
    pub iteration: usize,
    pub epoch: usize,
    pub env_steps: u64,
}

/// A training episode completed during an iteration, stamped with the
/// cumulative environment step count at its last transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainEpisode {
    pub env_steps: u64,
    pub episode_return: f64,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub episodes: Vec<TrainEpisode>,
    pub mean_episode_return: Option<f64>,
    /// Cumulative training steps after this iteration's rollout.
    pub env_steps: u64,
    pub gradient_steps: usize,
    /// Averages over the final epoch's minibatches.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl IterationRecord {
    pub fn anchor(&self) -> &Checkpoint {
        self.checkpoints.last().expect("n_epochs >= 1")
    }
}

/// Networks, optimizer state and the live environment of one training run.
pub struct PpoTrainer {
    pub cfg: PpoConfig,
    pub nets: ActorCritic,
    optimizer: Adam,
    runner: EnvRunner,
    sampling_rng: ChaCha8Rng,
    minibatch_rng: ChaCha8Rng,
    env_steps: u64,
    iteration: usize,
    last_buffer: Option<RolloutBuffer>,
}

impl PpoTrainer {
    pub fn new(cfg: PpoConfig, env: Box<dyn Env>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = stream_rng(seed, Stream::PolicyInit);
        let mut nets = ActorCritic::new(
            env.obs_dim(),
            &cfg.hidden,
            env.action_low(),
            env.action_high(),
            &mut init_rng,
        );
        nets.policy.log_std.iter_mut().for_each(|ls| *ls = cfg.init_log_std);
        nets.policy.clamp_log_std();
        let optimizer = Adam::new(nets.flatten().len(), cfg.learning_rate);
        Ok(Self {
            runner: EnvRunner::new(env, stream_rng(seed, Stream::Env)),
            sampling_rng: stream_rng(seed, Stream::PolicySampling),
            minibatch_rng: stream_rng(seed, Stream::Minibatch),
            cfg,
            nets,
            optimizer,
            env_steps: 0,
            iteration: 0,
            last_buffer: None,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Buffer of the most recent rollout, with advantages computed.
    pub fn last_buffer(&self) -> Option<&RolloutBuffer> {
        self.last_buffer.as_ref()
    }

    pub fn policy_params(&self) -> FlatParams {
        self.nets.policy.flatten()
    }

    /// Installs a new policy (value network untouched), clamps its log-std
    /// and clears the optimizer moments.
    pub fn replace_policy(&mut self, params: &FlatParams) -> Result<()> {
        crate::error::ensure_finite(params.values(), "replacement policy")?;
        self.nets.policy.load_flat(params)?;
        self.nets.policy.clamp_log_std();
        self.optimizer.reset();
        Ok(())
    }

    /// Gradient of the PPO loss over the whole last rollout, restricted to
    /// the policy subspace.
    pub fn policy_gradient(&self) -> Result<FlatParams> {
        let buffer = self
            .last_buffer
            .as_ref()
            .ok_or(Error::Empty("no rollout collected yet"))?;
        let (_, grads) = ppo_loss_and_grad(&self.nets, &MiniBatch::whole(buffer), &self.cfg)?;
        Ok(grads.policy.flatten())
    }

    /// One rollout followed by `n_epochs` passes of minibatch updates.
    pub fn train_iteration(&mut self) -> Result<IterationRecord> {
        self.iteration += 1;
        let steps_before = self.env_steps;
        let (mut buffer, ends) = self.runner.collect_rollout(
            &self.nets.policy,
            &self.nets.value,
            self.cfg.steps_per_rollout,
            ActionMode::Stochastic,
            &mut self.sampling_rng,
        )?;
        self.env_steps += buffer.len() as u64;
        buffer.finish(self.cfg.gamma, self.cfg.gae_lambda)?;
        if self.cfg.normalize_advantages {
            buffer.normalize_advantages();
        }
        let episodes: Vec<TrainEpisode> = ends
            .iter()
            .map(|e: &EpisodeEnd| TrainEpisode {
                env_steps: steps_before + e.step as u64 + 1,
                episode_return: e.episode_return,
                length: e.length,
            })
            .collect();

        let mut checkpoints = Vec::with_capacity(self.cfg.n_epochs);
        let mut gradient_steps = 0;
        let mut epoch_terms = LossTerms::default();
        for epoch in 0..self.cfg.n_epochs {
            let batches = minibatch_iter(buffer.len(), self.cfg.batch_size, &mut self.minibatch_rng)?;
            epoch_terms = LossTerms::default();
            for indices in &batches {
                let batch = MiniBatch::gather(&buffer, indices);
                let (terms, grads) = ppo_loss_and_grad(&self.nets, &batch, &self.cfg)?;
                self.apply_gradient(grads)?;
                gradient_steps += 1;
                let k = batches.len() as f64;
                epoch_terms.total += terms.total / k;
                epoch_terms.policy += terms.policy / k;
                epoch_terms.value += terms.value / k;
                epoch_terms.entropy += terms.entropy / k;
            }
            checkpoints.push(Checkpoint {
                params: self.nets.policy.flatten(),
                iteration: self.iteration,
                epoch: epoch + 1,
                env_steps: self.env_steps,
            });
        }
        let mean_episode_return = if episodes.is_empty() {
            None
        } else {
            Some(episodes.iter().map(|e| e.episode_return).sum::<f64>() / episodes.len() as f64)
        };
        self.last_buffer = Some(buffer);
        Ok(IterationRecord {
            iteration: self.iteration,
            checkpoints,
            episodes,
            mean_episode_return,
            env_steps: self.env_steps,
            gradient_steps,
            policy_loss: epoch_terms.policy,
            value_loss: epoch_terms.value,
            entropy: epoch_terms.entropy,
        })
    }

    fn apply_gradient(&mut self, grads: ActorCritic) -> Result<()> {
        let mut grad = grads.flatten().into_values();
        let norm = clip_grad_norm(&mut grad, self.cfg.max_grad_norm);
        if !norm.is_finite() {
            return Err(Error::Diverged {
                message: "non-finite gradient".into(),
                checksum: self.nets.flatten().checksum(),
            });
        }
        let mut params = self.nets.flatten();
        self.optimizer.step(params.values_mut(), &grad);
        self.nets.load_flat(&params)?;
        self.nets.policy.clamp_log_std();
        Ok(())
    }

    /// Draws a random observation from the last rollout.
    pub fn sample_observation<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        let buffer = self.last_buffer.as_ref()?;
        let i = rng.random_range(0..buffer.len());
        Some(buffer.transitions[i].obs.clone())
    }
}
