//! The iteration-level training loop: PPO iterations feed an anchor set;
//! every `esa_interval` anchors a candidate generator proposes policies,
//! all candidates are scored on one shared seed set, and the winner
//! replaces the policy before training resumes.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    checkpoint_average, guided_es_candidate, pbt_step, random_walk_candidates, vfs_candidate,
    GuidedEsConfig, Population, VfsConfig, POPULATION_SIZE,
};
use crate::candidates::{Candidate, CandidateSet, Provenance};
use crate::envs::EnvId;
use crate::error::{Error, Result, StateDump};
use crate::esa::{run_esa, EsaConfig};
use crate::evaluator::{rank_candidates, EvalReport, Evaluator};
use crate::nn::{ActionMode, FlatParams};
use crate::ppo::{Checkpoint, PpoConfig, PpoTrainer};
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Explorler,
    CheckpointAvg,
    RandomWalk,
    Pbt,
    GuidedEs,
    Vfs,
    None,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Explorler,
        Method::CheckpointAvg,
        Method::RandomWalk,
        Method::Pbt,
        Method::GuidedEs,
        Method::Vfs,
        Method::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Explorler => "explorler",
            Method::CheckpointAvg => "checkpoint_avg",
            Method::RandomWalk => "random_walk",
            Method::Pbt => "pbt",
            Method::GuidedEs => "guided_es",
            Method::Vfs => "vfs",
            Method::None => "none",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub total_iterations: usize,
    /// Anchors collected between candidate events.
    pub esa_interval: usize,
    pub eval_episodes: usize,
    pub include_incumbent: bool,
    /// Plain PPO steps before anchors are collected.
    pub pretrain_steps: u64,
    pub eval_action_mode: ActionMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            total_iterations: 196,
            esa_interval: 10,
            eval_episodes: 3,
            include_incumbent: true,
            pretrain_steps: 0,
            eval_action_mode: ActionMode::Deterministic,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: format!("pipeline.{key}"),
                message: message.to_string(),
            })
        };
        if self.esa_interval == 0 {
            return bad("esa_interval", "must be at least 1");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub pbt_noise_std: f64,
    pub guided_es: GuidedEsConfig,
    pub vfs: VfsConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            pbt_noise_std: 0.02,
            guided_es: GuidedEsConfig::default(),
            vfs: VfsConfig::default(),
        }
    }
}

/// Everything one seeded run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub method: Method,
    pub ppo: PpoConfig,
    pub esa: EsaConfig,
    pub pipeline: PipelineConfig,
    pub baselines: BaselineConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.esa.validate()?;
        self.pipeline.validate()?;
        if self.method == Method::Explorler && self.pipeline.esa_interval < 2 {
            return Err(Error::Config {
                key: "pipeline.esa_interval".into(),
                message: "particle search needs at least two anchors".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Train,
    EsaSwap,
    EsaNoswap,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Train => "train",
            EventType::EsaSwap => "esa_swap",
            EventType::EsaNoswap => "esa_noswap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    /// Training plus evaluation steps so far.
    pub env_steps: u64,
    pub iteration: usize,
    pub episode_return: f64,
    pub event_type: EventType,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingCurve {
    pub rows: Vec<CurveRow>,
}

impl TrainingCurve {
    pub const HEADER: &'static str = "env_steps_cumulative,iteration,episode_return,event_type";

    pub fn train_returns(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.event_type == EventType::Train)
            .map(|r| r.episode_return)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.env_steps,
                r.iteration,
                r.episode_return,
                r.event_type.as_str()
            )?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::HEADER => {}
            _ => return Err(Error::InvalidArgument("curve CSV header mismatch".into())),
        }
        let parse_err = |line: &str| Error::InvalidArgument(format!("bad curve row `{line}`"));
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(parse_err(line));
            }
            let event_type = match f[3].trim() {
                "train" => EventType::Train,
                "esa_swap" => EventType::EsaSwap,
                "esa_noswap" => EventType::EsaNoswap,
                _ => return Err(parse_err(line)),
            };
            rows.push(CurveRow {
                env_steps: f[0].parse().map_err(|_| parse_err(line))?,
                iteration: f[1].parse().map_err(|_| parse_err(line))?,
                episode_return: f[2].parse().map_err(|_| parse_err(line))?,
                event_type,
            });
        }
        Ok(Self { rows })
    }
}

/// Per-iteration training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub env_steps: u64,
    pub mean_episode_return: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl IterationLog {
    pub const HEADER: &'static str = "iteration,env_steps,mean_episode_return,policy_loss,value_loss,entropy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.mean_episode_return.map(|r| r.to_string()).unwrap_or_default(),
            self.policy_loss,
            self.value_loss,
            self.entropy
        )
    }
}

/// One candidate event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub event: usize,
    pub iteration: usize,
    pub method: Method,
    /// Candidates proposed by the generator (the incumbent is not counted).
    pub generated: usize,
    /// Candidates scored for the final ranking, incumbent included.
    pub evaluated: usize,
    pub ranking_episodes: usize,
    /// Steps spent ranking candidates.
    pub ranking_env_steps: u64,
    /// Steps the generator spent on its own evaluations.
    pub generator_env_steps: u64,
    pub seeds: Vec<u64>,
    pub best_candidate: usize,
    pub best_provenance: Provenance,
    pub best_mean_return: f64,
    pub incumbent_mean_return: Option<f64>,
    pub swapped: bool,
}

impl EventLog {
    pub fn extra_env_steps(&self) -> u64 {
        self.ranking_env_steps + self.generator_env_steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub event: usize,
    pub iteration: usize,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub curve: TrainingCurve,
    pub iterations: Vec<IterationLog>,
    pub events: Vec<EventLog>,
    pub reports: Vec<EventReport>,
    pub final_policy: FlatParams,
    pub train_env_steps: u64,
    pub eval_env_steps: u64,
    /// The most recent `esa_interval` anchors, oldest first.
    pub recent_anchors: Vec<Checkpoint>,
    /// Epoch checkpoints of the final iteration.
    pub last_epochs: Vec<Checkpoint>,
}

impl RunOutcome {
    pub fn total_env_steps(&self) -> u64 {
        self.train_env_steps + self.eval_env_steps
    }

    pub fn write_reports_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.reports {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// What a generator can see when an event fires.
pub struct EventContext<'a> {
    pub anchors: &'a [FlatParams],
    pub last_epochs: &'a [Checkpoint],
    pub incumbent: &'a FlatParams,
    pub trainer: &'a PpoTrainer,
    pub evaluator: &'a Evaluator,
    /// The event's shared evaluation seeds.
    pub seeds: &'a [u64],
}

/// Produces candidate policies at an event. Implementations may keep state
/// across events and may evaluate policies through the context evaluator.
pub trait CandidateGenerator: Send {
    fn method(&self) -> Method;
    fn generate(&mut self, ctx: &EventContext<'_>, rng: &mut ChaCha8Rng) -> Result<CandidateSet>;
}

pub struct EsaGenerator {
    pub cfg: EsaConfig,
}

impl CandidateGenerator for EsaGenerator {
    fn method(&self) -> Method {
        Method::Explorler
    }

    fn generate(&mut self, ctx: &EventContext<'_>, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
        run_esa(ctx.anchors, &self.cfg, rng)
    }
}

pub struct RandomWalkGenerator {
    pub cfg: EsaConfig,
}

impl CandidateGenerator for RandomWalkGenerator {
    fn method(&self) -> Method {
        Method::RandomWalk
    }

    fn generate(&mut self, ctx: &EventContext<'_>, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
        let anchor = ctx.anchors.last().ok_or(Error::Empty("anchor set"))?;
        random_walk_candidates(anchor, &self.cfg, rng)
    }
}

pub struct CheckpointAvgGenerator;

impl CandidateGenerator for CheckpointAvgGenerator {
    fn method(&self) -> Method {
        Method::CheckpointAvg
    }

    fn generate(&mut self, ctx: &EventContext<'_>, _rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
        let epochs: Vec<FlatParams> = ctx.last_epochs.iter().map(|c| c.params.clone()).collect();
        Ok(vec![Candidate::new(checkpoint_average(&epochs)?, Provenance::CheckpointAverage)])
    }
}

pub struct PbtGenerator {
    pub noise_std: f64,
    pub population: Option<Population>,
}

impl CandidateGenerator for PbtGenerator {
    fn method(&self) -> Method {
        Method::Pbt
    }

    fn generate(&mut self, ctx: &EventContext<'_>, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
        let population = match self.population.take() {
            Some(p) => p,
            None => {
                // Seed with the most recent epoch checkpoints, cycling if an
                // iteration has fewer epochs than the population size.
                let epochs = ctx.last_epochs;
                if epochs.is_empty() {
                    return Err(Error::Empty("epoch checkpoints"));
                }
                let start = epochs.len().saturating_sub(POPULATION_SIZE);
                let recent = &epochs[start..];
                Population::new(
                    (0..POPULATION_SIZE)
                        .map(|i| recent[i % recent.len()].params.clone())
                        .collect(),
                )
            }
        };
        let outcome = pbt_step(&population, ctx.evaluator, ctx.seeds, self.noise_std, rng)?;
        self.population = Some(outcome.population);
        Ok(vec![Candidate::new(outcome.best, Provenance::Pbt { member: 0 })])
    }
}

pub struct GuidedEsGenerator {
    pub cfg: GuidedEsConfig,
}

impl CandidateGenerator for GuidedEsGenerator {
    fn method(&self) -> Method {
        Method::GuidedEs
    }

    fn generate(&mut self, ctx: &EventContext<'_>, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
        let ascent: Vec<f64> = ctx.trainer.policy_gradient()?.values().iter().map(|g| -g).collect();
        let evaluator = ctx.evaluator;
        let seeds = ctx.seeds;
        let objective = move |p: &FlatParams| evaluator.score(p, seeds);
        let outcome = guided_es_candidate(ctx.incumbent, &ascent, &objective, &self.cfg, rng)?;
        Ok(vec![Candidate::new(outcome.candidate, Provenance::GuidedEs)])
    }
}

pub struct VfsGenerator {
    pub cfg: VfsConfig,
}

impl CandidateGenerator for VfsGenerator {
    fn method(&self) -> Method {
        Method::Vfs
    }

    fn generate(&mut self, ctx: &EventContext<'_>, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
        let obs = ctx
            .trainer
            .sample_observation(rng)
            .ok_or(Error::Empty("no rollout to sample observations from"))?;
        let candidate = vfs_candidate(&ctx.trainer.nets.policy, &ctx.trainer.nets.value, &[obs], &self.cfg)?;
        Ok(vec![Candidate::new(candidate, Provenance::Vfs)])
    }
}

/// Generator for `method`, or `None` for plain PPO.
pub fn make_generator(cfg: &ExperimentConfig) -> Option<Box<dyn CandidateGenerator>> {
    match cfg.method {
        Method::Explorler => Some(Box::new(EsaGenerator { cfg: cfg.esa.clone() })),
        Method::RandomWalk => Some(Box::new(RandomWalkGenerator { cfg: cfg.esa.clone() })),
        Method::CheckpointAvg => Some(Box::new(CheckpointAvgGenerator)),
        Method::Pbt => Some(Box::new(PbtGenerator {
            noise_std: cfg.baselines.pbt_noise_std,
            population: None,
        })),
        Method::GuidedEs => {
            let mut ges = cfg.baselines.guided_es.clone();
            ges.learning_rate = cfg.ppo.learning_rate;
            Some(Box::new(GuidedEsGenerator { cfg: ges }))
        }
        Method::Vfs => Some(Box::new(VfsGenerator {
            cfg: cfg.baselines.vfs.clone(),
        })),
        Method::None => None,
    }
}

/// Runs the configured method.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let generator = make_generator(cfg);
    run_with_generator(cfg, generator, seed)
}

/// The explorer pipeline proper: PPO with particle search every
/// `esa_interval` iterations.
pub fn run_explorler(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let cfg = ExperimentConfig {
        method: Method::Explorler,
        ..cfg.clone()
    };
    run_experiment(&cfg, seed)
}

/// Same loop with a baseline generator (`None` is plain PPO).
pub fn run_baseline_pipeline(cfg: &ExperimentConfig, baseline: Method, seed: u64) -> Result<RunOutcome> {
    if baseline == Method::Explorler {
        return Err(Error::UnknownMethod("explorler is not a baseline".into()));
    }
    let cfg = ExperimentConfig {
        method: baseline,
        ..cfg.clone()
    };
    run_experiment(&cfg, seed)
}

/// Shared loop for every method; `generator = None` never fires events.
pub fn run_with_generator(
    cfg: &ExperimentConfig,
    mut generator: Option<Box<dyn CandidateGenerator>>,
    seed: u64,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let interval = cfg.pipeline.esa_interval;
    let mut trainer = PpoTrainer::new(cfg.ppo.clone(), cfg.env.make(), seed)?;
    let evaluator = Evaluator::for_env(cfg.env, cfg.pipeline.eval_episodes, cfg.pipeline.eval_action_mode);
    let mut eval_rng = stream_rng(seed, Stream::Eval);
    let mut generator_rng = stream_rng(
        seed,
        match cfg.method {
            Method::Explorler | Method::RandomWalk => Stream::Esa,
            _ => Stream::Baseline,
        },
    );

    let mut curve = TrainingCurve::default();
    let mut iterations = Vec::new();
    let mut events: Vec<EventLog> = Vec::new();
    let mut reports = Vec::new();
    let mut anchors: Vec<FlatParams> = Vec::with_capacity(interval);
    let mut recent: VecDeque<Checkpoint> = VecDeque::with_capacity(interval);
    let mut last_epochs = Vec::new();
    let mut eval_steps = 0u64;

    for _ in 0..cfg.pipeline.total_iterations {
        let pretraining = trainer.env_steps() < cfg.pipeline.pretrain_steps;
        let record = trainer.train_iteration()?;
        for ep in &record.episodes {
            curve.rows.push(CurveRow {
                env_steps: ep.env_steps + eval_steps,
                iteration: record.iteration,
                episode_return: ep.episode_return,
                event_type: EventType::Train,
            });
        }
        iterations.push(IterationLog {
            iteration: record.iteration,
            env_steps: record.env_steps + eval_steps,
            mean_episode_return: record.mean_episode_return,
            policy_loss: record.policy_loss,
            value_loss: record.value_loss,
            entropy: record.entropy,
        });
        last_epochs = record.checkpoints.clone();
        if generator.is_none() || pretraining {
            continue;
        }
        let anchor = record.anchor().clone();
        anchors.push(anchor.params.clone());
        if recent.len() == interval {
            recent.pop_front();
        }
        recent.push_back(anchor);
        if anchors.len() < interval {
            continue;
        }

        let gen = generator.as_mut().expect("checked above");
        let seeds = evaluator.draw_seed_set(&mut eval_rng);
        let incumbent = trainer.policy_params();
        let before = evaluator.steps_used();
        let attempt = (|| {
            let ctx = EventContext {
                anchors: &anchors,
                last_epochs: &record.checkpoints,
                incumbent: &incumbent,
                trainer: &trainer,
                evaluator: &evaluator,
                seeds: &seeds,
            };
            let mut candidates = gen.generate(&ctx, &mut generator_rng)?;
            let generated = candidates.len();
            if cfg.pipeline.include_incumbent {
                candidates.push(Candidate::new(incumbent.clone(), Provenance::Incumbent));
            }
            let reports = evaluator.evaluate_all(&candidates, &seeds)?;
            let best = rank_candidates(&reports)?;
            Ok((candidates, generated, reports, best))
        })();
        let (candidates, generated, event_reports, best) = match attempt {
            Ok(v) => v,
            Err(source) => {
                return Err(Error::EventFailed {
                    iteration: record.iteration,
                    source: Box::new(source),
                    dump: Box::new(StateDump {
                        incumbent,
                        anchors,
                        seeds,
                    }),
                })
            }
        };
        let ranking_env_steps: u64 = event_reports.iter().map(EvalReport::env_steps).sum();
        let generator_env_steps = evaluator.steps_used() - before - ranking_env_steps;
        let best_provenance = candidates[best].provenance;
        let swapped = best_provenance != Provenance::Incumbent;
        if swapped {
            trainer.replace_policy(&candidates[best].params)?;
        }
        let incumbent_mean_return = cfg
            .pipeline
            .include_incumbent
            .then(|| event_reports[event_reports.len() - 1].mean_return);
        eval_steps += ranking_env_steps + generator_env_steps;
        let event = events.len();
        curve.rows.push(CurveRow {
            env_steps: trainer.env_steps() + eval_steps,
            iteration: record.iteration,
            episode_return: event_reports[best].mean_return,
            event_type: if swapped {
                EventType::EsaSwap
            } else {
                EventType::EsaNoswap
            },
        });
        events.push(EventLog {
            event,
            iteration: record.iteration,
            method: gen.method(),
            generated,
            evaluated: candidates.len(),
            ranking_episodes: candidates.len() * seeds.len(),
            ranking_env_steps,
            generator_env_steps,
            seeds: seeds.clone(),
            best_candidate: best,
            best_provenance,
            best_mean_return: event_reports[best].mean_return,
            incumbent_mean_return,
            swapped,
        });
        reports.extend(event_reports.into_iter().map(|report| EventReport {
            event,
            iteration: record.iteration,
            report,
        }));
        anchors.clear();
    }

    Ok(RunOutcome {
        curve,
        iterations,
        events,
        reports,
        final_policy: trainer.policy_params(),
        train_env_steps: trainer.env_steps(),
        eval_env_steps: eval_steps,
        recent_anchors: recent.into_iter().collect(),
        last_epochs,
    })
}
