//! Online policy-value estimate: average undiscounted return over a small,
//! fixed set of seeded episodes.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{Candidate, Provenance};
use crate::envs::{Env, EnvId};
use crate::error::{Error, Result};
use crate::nn::{ActionMode, FlatParams, GaussianPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub candidate_id: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<Provenance>,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub seeds: Vec<u64>,
    pub episode_lengths: Vec<usize>,
}

impl EvalReport {
    pub fn env_steps(&self) -> u64 {
        self.episode_lengths.iter().map(|&l| l as u64).sum()
    }
}

type EnvFactory = Arc<dyn Fn() -> Box<dyn Env> + Send + Sync>;

/// Scores candidate policies and keeps a running count of the environment
/// steps it spends doing so.
#[derive(Clone)]
pub struct Evaluator {
    make_env: EnvFactory,
    pub episodes: usize,
    pub mode: ActionMode,
    steps: Arc<AtomicU64>,
    episodes_run: Arc<AtomicU64>,
}

impl std::fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evaluator")
            .field("episodes", &self.episodes)
            .field("mode", &self.mode)
            .field("steps", &self.steps_used())
            .finish()
    }
}

impl Evaluator {
    pub fn new(
        make_env: impl Fn() -> Box<dyn Env> + Send + Sync + 'static,
        episodes: usize,
        mode: ActionMode,
    ) -> Self {
        Self {
            make_env: Arc::new(make_env),
            episodes,
            mode,
            steps: Arc::new(AtomicU64::new(0)),
            episodes_run: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn for_env(env: EnvId, episodes: usize, mode: ActionMode) -> Self {
        Self::new(move || env.make(), episodes, mode)
    }

    pub fn steps_used(&self) -> u64 {
        self.steps.load(Ordering::Relaxed)
    }

    pub fn episodes_run(&self) -> u64 {
        self.episodes_run.load(Ordering::Relaxed)
    }

    /// A fresh seed list for one paired comparison.
    pub fn draw_seed_set<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        (0..self.episodes).map(|_| rng.random()).collect()
    }

    pub fn evaluate(&self, id: usize, candidate: &FlatParams, seeds: &[u64]) -> Result<EvalReport> {
        let tag = |e: Error| Error::Candidate {
            id,
            source: Box::new(e),
        };
        if seeds.len() != self.episodes {
            return Err(tag(Error::Dimension {
                context: "evaluation seed set",
                expected: self.episodes,
                actual: seeds.len(),
            }));
        }
        let mut env = (self.make_env)();
        let policy = GaussianPolicy::from_flat(candidate, env.action_low(), env.action_high())
            .map_err(tag)?;
        let mut returns = Vec::with_capacity(seeds.len());
        let mut lengths = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let (ret, len) = run_episode(env.as_mut(), &policy, seed, self.mode).map_err(tag)?;
            returns.push(ret);
            lengths.push(len);
        }
        let steps: u64 = lengths.iter().map(|&l| l as u64).sum();
        self.steps.fetch_add(steps, Ordering::Relaxed);
        self.episodes_run.fetch_add(seeds.len() as u64, Ordering::Relaxed);
        let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
        Ok(EvalReport {
            candidate_id: id,
            provenance: None,
            returns,
            mean_return,
            seeds: seeds.to_vec(),
            episode_lengths: lengths,
        })
    }

    /// Evaluates every candidate on the same seeds, in parallel. Reports come
    /// back in candidate order with ids `0..n`.
    pub fn evaluate_all(&self, candidates: &[Candidate], seeds: &[u64]) -> Result<Vec<EvalReport>> {
        candidates
            .par_iter()
            .enumerate()
            .map(|(id, c)| {
                let mut r = self.evaluate(id, &c.params, seeds)?;
                r.provenance = Some(c.provenance);
                Ok(r)
            })
            .collect()
    }

    /// Mean return of a bare parameter vector on `seeds`.
    pub fn score(&self, params: &FlatParams, seeds: &[u64]) -> Result<f64> {
        Ok(self.evaluate(0, params, seeds)?.mean_return)
    }
}

/// Runs one episode to its horizon; returns (undiscounted return, length).
pub fn run_episode(
    env: &mut dyn Env,
    policy: &GaussianPolicy,
    seed: u64,
    mode: ActionMode,
) -> Result<(f64, usize)> {
    let mut obs = env.reset(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut total = 0.0;
    let mut len = 0;
    loop {
        let action = policy.act(&obs, mode, &mut rng)?;
        let step = env.step(&action.clipped)?;
        total += step.reward;
        len += 1;
        obs = step.observation;
        if step.done {
            break;
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("episode return".into()));
    }
    Ok((total, len))
}

pub fn evaluate_policy(
    candidate: &FlatParams,
    env: EnvId,
    seeds: &[u64],
    mode: ActionMode,
) -> Result<EvalReport> {
    Evaluator::for_env(env, seeds.len(), mode).evaluate(0, candidate, seeds)
}

/// Id of the report with the highest mean return; ties go to the lowest id.
pub fn rank_candidates(reports: &[EvalReport]) -> Result<usize> {
    reports
        .iter()
        .min_by(|a, b| {
            b.mean_return
                .total_cmp(&a.mean_return)
                .then(a.candidate_id.cmp(&b.candidate_id))
        })
        .map(|r| r.candidate_id)
        .ok_or(Error::Empty("evaluation reports"))
}

/// `Σ γ^t r_t`
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Pendulum, StepResult};
    use crate::nn::ActorCritic;

    struct Constant {
        t: usize,
    }

    impl Env for Constant {
        fn obs_dim(&self) -> usize {
            1
        }
        fn action_low(&self) -> Vec<f64> {
            vec![-1.0]
        }
        fn action_high(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn horizon(&self) -> usize {
            10
        }
        fn reset(&mut self, _seed: u64) -> Vec<f64> {
            self.t = 0;
            vec![0.0]
        }
        fn step(&mut self, _action: &[f64]) -> Result<StepResult> {
            self.t += 1;
            Ok(StepResult {
                observation: vec![0.0],
                reward: 1.0,
                done: self.t >= 10,
            })
        }
    }

    fn zero_policy(obs: usize, act: usize) -> FlatParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicy::new(obs, &[8], vec![-1.0; act], vec![1.0; act], &mut rng);
        FlatParams::zeros(p.layout())
    }

    #[test]
    fn constant_reward_env() {
        let ev = Evaluator::new(|| Box::new(Constant { t: 0 }), 3, ActionMode::Deterministic);
        let r = ev.evaluate(4, &zero_policy(1, 1), &[1, 2, 3]).unwrap();
        assert_eq!(r.returns, vec![10.0, 10.0, 10.0]);
        assert_eq!(r.mean_return, 10.0);
        assert_eq!(r.candidate_id, 4);
        assert_eq!(ev.steps_used(), 30);
        assert_eq!(ev.episodes_run(), 3);
    }

    #[test]
    fn wrong_layout_is_tagged() {
        let ev = Evaluator::for_env(EnvId::Pendulum, 1, ActionMode::Deterministic);
        match ev.evaluate(7, &zero_policy(2, 2), &[0]) {
            Err(Error::Candidate { id, .. }) => assert_eq!(id, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ev.evaluate(0, &zero_policy(3, 1), &[0, 1]).is_err());
    }

    #[test]
    fn repeated_evaluation_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ac = ActorCritic::new(3, &[16, 16], vec![-2.0], vec![2.0], &mut rng);
        let a = evaluate_policy(&ac.policy.flatten(), EnvId::Pendulum, &[3, 4, 5], ActionMode::Stochastic).unwrap();
        let b = evaluate_policy(&ac.policy.flatten(), EnvId::Pendulum, &[3, 4, 5], ActionMode::Stochastic).unwrap();
        assert_eq!(a, b);
        let mean = a.returns.iter().sum::<f64>() / 3.0;
        assert!((a.mean_return - mean).abs() < 1e-12);
    }

    #[test]
    fn zero_policy_matches_unactuated_simulation() {
        let seed = 123;
        let report =
            evaluate_policy(&zero_policy(3, 1), EnvId::Pendulum, &[seed], ActionMode::Deterministic).unwrap();
        // Oracle: integrate the free pendulum directly from the seeded start.
        let mut env = Pendulum::default();
        env.reset(seed);
        let (mut th, mut thdot) = (env.theta, env.theta_dot);
        let mut total = 0.0;
        for _ in 0..200 {
            let wrapped = crate::envs::wrap_angle(th);
            total -= wrapped * wrapped + 0.1 * thdot * thdot;
            thdot = (thdot + 15.0 * th.sin() * 0.05).clamp(-8.0, 8.0);
            th += thdot * 0.05;
        }
        assert!((report.mean_return - total).abs() < 1e-9);
        assert_eq!(report.episode_lengths, vec![200]);
    }

    fn report(id: usize, mean: f64) -> EvalReport {
        EvalReport {
            candidate_id: id,
            provenance: None,
            returns: vec![mean],
            mean_return: mean,
            seeds: vec![0],
            episode_lengths: vec![1],
        }
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_candidates(&[report(0, 1.0), report(1, 3.0), report(2, 2.0)]).unwrap(), 1);
        assert_eq!(rank_candidates(&[report(3, 1.0), report(1, 1.0), report(2, 1.0)]).unwrap(), 1);
        assert_eq!(rank_candidates(&[report(9, -4.0)]).unwrap(), 9);
        assert!(rank_candidates(&[]).is_err());
    }

    #[test]
    fn discounting() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.0), 1.0);
        assert_eq!(discounted_return(&[1.0, 1.0], 0.5), 1.5);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }
}
