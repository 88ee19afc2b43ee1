//! Alternative candidate generators that slot into the same iteration-level
//! hook as empty-space search: checkpoint averaging, random walks,
//! population-based training, guided evolution strategies and a
//! value-guided policy nudge.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::candidates::{Candidate, CandidateSet, Provenance};
use crate::error::{Error, Result};
use crate::esa::EsaConfig;
use crate::evaluator::{EvalReport, Evaluator};
use crate::nn::flat::norm;
use crate::nn::{gaussian, FlatParams, GaussianPolicy, ValueNet};

/// Coordinate-wise mean. Each coordinate is summed in sorted order, so the
/// result does not depend on the order of the inputs.
pub fn checkpoint_average(checkpoints: &[FlatParams]) -> Result<FlatParams> {
    let first = checkpoints.first().ok_or(Error::Empty("checkpoint list"))?;
    if checkpoints.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Layout("checkpoints differ in length".into()));
    }
    let n = checkpoints.len() as f64;
    let mut column = Vec::with_capacity(checkpoints.len());
    let values = (0..first.len())
        .map(|i| {
            column.clear();
            column.extend(checkpoints.iter().map(|c| c.values()[i]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n
        })
        .collect();
    first.with_values(values)
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `m` walkers leave `anchor` with steps of length `α` in uniformly random
/// directions, released on the same schedule as the particle search.
pub fn random_walk_candidates(anchor: &FlatParams, cfg: &EsaConfig, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
    cfg.validate()?;
    let mut walkers: Vec<Vec<f64>> = vec![anchor.values().to_vec(); cfg.num_agents];
    let mut out = Vec::with_capacity(cfg.candidate_count());
    for (walker, position) in walkers.iter().enumerate() {
        out.push(Candidate::new(
            anchor.with_values(position.clone())?,
            Provenance::RandomWalkInitial { walker },
        ));
    }
    for step in 1..=cfg.num_steps {
        for position in walkers.iter_mut() {
            let u = random_unit(position.len(), rng);
            position.iter_mut().zip(&u).for_each(|(x, d)| *x += cfg.step_size * d);
        }
        if step % cfg.release_interval == 0 {
            for (walker, position) in walkers.iter().enumerate() {
                out.push(Candidate::new(
                    anchor.with_values(position.clone())?,
                    Provenance::RandomWalkRelease { walker, step },
                ));
            }
        }
    }
    Ok(out)
}

pub const POPULATION_SIZE: usize = 10;

/// Policies kept alive across events by population-based training.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<FlatParams>,
    /// Mean return from the most recent evaluation, if any.
    pub fitness: Vec<Option<f64>>,
}

impl Population {
    pub fn new(members: Vec<FlatParams>) -> Self {
        let fitness = vec![None; members.len()];
        Self { members, fitness }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PbtOutcome {
    pub population: Population,
    /// Highest-scoring member before mutation.
    pub best: FlatParams,
    pub reports: Vec<EvalReport>,
}

/// Evaluates every member on `seeds`, keeps the better half and refills the
/// rest with Gaussian-perturbed copies of uniformly chosen survivors.
pub fn pbt_step(
    population: &Population,
    evaluator: &Evaluator,
    seeds: &[u64],
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PbtOutcome> {
    if population.len() < 2 {
        return Err(Error::InvalidArgument("population needs at least two members".into()));
    }
    let candidates: Vec<Candidate> = population
        .members
        .iter()
        .enumerate()
        .map(|(member, p)| Candidate::new(p.clone(), Provenance::Pbt { member }))
        .collect();
    let reports = evaluator.evaluate_all(&candidates, seeds)?;
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| reports[b].mean_return.total_cmp(&reports[a].mean_return).then(a.cmp(&b)));
    let keep = population.len() / 2;
    let survivors = &order[..keep];
    let mut members: Vec<FlatParams> = survivors.iter().map(|&i| population.members[i].clone()).collect();
    let mut fitness: Vec<Option<f64>> = survivors.iter().map(|&i| Some(reports[i].mean_return)).collect();
    while members.len() < population.len() {
        let parent = &members[rng.random_range(0..keep)];
        let values = parent
            .values()
            .iter()
            .map(|v| v + noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        members.push(parent.with_values(values)?);
        fitness.push(None);
    }
    Ok(PbtOutcome {
        best: population.members[order[0]].clone(),
        population: Population { members, fitness },
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidedEsConfig {
    pub sigma: f64,
    pub n_perturb: usize,
    /// Weight of the surrogate direction in the convex mix.
    pub mix: f64,
    pub learning_rate: f64,
}

impl Default for GuidedEsConfig {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            n_perturb: 4,
            mix: 0.5,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GuidedEsOutcome {
    pub candidate: FlatParams,
    pub es_gradient: Vec<f64>,
    pub direction: Vec<f64>,
}

fn unit_or_zero(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Antithetic ES estimate mixed with the surrogate ascent direction.
/// `surrogate_ascent` points uphill (the negated loss gradient).
pub fn guided_es_candidate(
    params: &FlatParams,
    surrogate_ascent: &[f64],
    objective: &(dyn Fn(&FlatParams) -> Result<f64> + Sync),
    cfg: &GuidedEsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GuidedEsOutcome> {
    let directions: Vec<Vec<f64>> = (0..cfg.n_perturb)
        .map(|_| (0..params.len()).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    guided_es_with_directions(params, surrogate_ascent, objective, cfg, &directions)
}

pub fn guided_es_with_directions(
    params: &FlatParams,
    surrogate_ascent: &[f64],
    objective: &(dyn Fn(&FlatParams) -> Result<f64> + Sync),
    cfg: &GuidedEsConfig,
    directions: &[Vec<f64>],
) -> Result<GuidedEsOutcome> {
    if surrogate_ascent.len() != params.len() {
        return Err(Error::Dimension {
            context: "surrogate gradient",
            expected: params.len(),
            actual: surrogate_ascent.len(),
        });
    }
    if directions.is_empty() {
        return Err(Error::Empty("perturbation directions"));
    }
    let mut es_gradient = vec![0.0; params.len()];
    let scale = 1.0 / (2.0 * cfg.sigma * directions.len() as f64);
    for eps in directions {
        let shifted = |sign: f64| -> Result<FlatParams> {
            params.with_values(
                params
                    .values()
                    .iter()
                    .zip(eps)
                    .map(|(p, e)| p + sign * cfg.sigma * e)
                    .collect(),
            )
        };
        let diff = objective(&shifted(1.0)?)? - objective(&shifted(-1.0)?)?;
        es_gradient
            .iter_mut()
            .zip(eps)
            .for_each(|(g, e)| *g += scale * diff * e);
    }
    let surrogate = unit_or_zero(surrogate_ascent);
    let es = unit_or_zero(&es_gradient);
    let direction: Vec<f64> = surrogate
        .iter()
        .zip(&es)
        .map(|(s, e)| cfg.mix * s + (1.0 - cfg.mix) * e)
        .collect();
    let candidate = if norm(&direction) == 0.0 {
        params.clone()
    } else {
        params.with_values(
            params
                .values()
                .iter()
                .zip(&direction)
                .map(|(p, d)| p + cfg.learning_rate * d)
                .collect(),
        )?
    };
    Ok(GuidedEsOutcome {
        candidate,
        es_gradient,
        direction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfsConfig {
    pub step_size: f64,
    pub steps: usize,
}

impl Default for VfsConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            steps: 3,
        }
    }
}

/// Gradient ascent on `mean_s V̂(s)·log π_θ(μ_θ(s) | s)` over the policy
/// parameters only; the value network is frozen.
pub fn vfs_candidate(
    policy: &GaussianPolicy,
    value_net: &ValueNet,
    obs_sample: &[Vec<f64>],
    cfg: &VfsConfig,
) -> Result<FlatParams> {
    if obs_sample.is_empty() {
        return Err(Error::Empty("observation sample"));
    }
    let values = obs_sample
        .iter()
        .map(|o| value_net.value(o))
        .collect::<Result<Vec<_>>>()?;
    let mut current = policy.clone();
    let n = obs_sample.len() as f64;
    for _ in 0..cfg.steps {
        let mut grad_net = current.mean_net.zeros_like();
        let mut grad_log_std = vec![0.0; current.log_std.len()];
        let mut d_mean = vec![0.0; current.log_std.len()];
        for (obs, v) in obs_sample.iter().zip(&values) {
            let trace = current.mean_net.forward_traced(obs)?;
            let mean = trace.output().to_vec();
            d_mean.iter_mut().for_each(|d| *d = 0.0);
            gaussian::log_prob_backward(
                &mean,
                &current.log_std,
                &mean,
                v / n,
                &mut d_mean,
                &mut grad_log_std,
            );
            current.mean_net.backward(&trace, &d_mean, &mut grad_net);
        }
        for (p, g) in current.mean_net.params_mut().zip(grad_net.params()) {
            *p += cfg.step_size * g;
        }
        for (ls, g) in current.log_std.iter_mut().zip(&grad_log_std) {
            *ls += cfg.step_size * g;
        }
    }
    Ok(current.flatten())
}
