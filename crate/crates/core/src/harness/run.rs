//! Seeded runs with on-disk artifacts, and multi-seed suites.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::pipeline::{run_experiment, IterationLog, Method, RunOutcome, TrainingCurve};

pub const BUILD_ID: &str = env!("EXPLORLER_BUILD_ID");

/// Trailing moving average; the first `window - 1` entries average the
/// available prefix.
pub fn smooth(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Largest value of the smoothed training-episode curve.
pub fn max_smoothed(curve: &TrainingCurve, window: usize) -> Result<f64> {
    let returns = curve.train_returns();
    if returns.is_empty() {
        return Err(Error::Empty("training curve has no episodes"));
    }
    Ok(smooth(&returns, window)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Mean of the last `window` training-episode returns.
pub fn final_window_mean(curve: &TrainingCurve, window: usize) -> Result<f64> {
    let returns = curve.train_returns();
    if returns.is_empty() {
        return Err(Error::Empty("training curve has no episodes"));
    }
    let tail = &returns[returns.len().saturating_sub(window)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub max_smoothed: f64,
    pub final_window_mean: f64,
    pub train_env_steps: u64,
    pub eval_env_steps: u64,
    pub events: usize,
    pub swaps: usize,
}

impl SeedSummary {
    pub fn from_outcome(seed: u64, outcome: &RunOutcome, window: usize) -> Result<Self> {
        Ok(Self {
            seed,
            max_smoothed: max_smoothed(&outcome.curve, window)?,
            final_window_mean: final_window_mean(&outcome.curve, window)?,
            train_env_steps: outcome.train_env_steps,
            eval_env_steps: outcome.eval_env_steps,
            events: outcome.events.len(),
            swaps: outcome.events.iter().filter(|e| e.swapped).count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    /// The resolved config as TOML, loadable with `--config`.
    pub config_toml: String,
    pub seed: u64,
    pub build_id: String,
    pub wall_time_secs: f64,
    pub status: String,
    pub train_env_steps: u64,
    pub eval_env_steps: u64,
    pub events: usize,
    pub swaps: usize,
    pub final_policy_checksum: Option<String>,
}

/// `<out>/<env>/<method>/seed_<seed>`
pub fn run_dir(out: &Path, env: EnvId, method: Method, seed: u64) -> PathBuf {
    out.join(env.as_str()).join(method.as_str()).join(format!("seed_{seed}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_iterations_csv(path: &Path, logs: &[IterationLog]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", IterationLog::HEADER)?;
    for l in logs {
        writeln!(w, "{}", l.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_run_artifacts(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut curve = create(&dir.join("curve.csv"))?;
    outcome.curve.write_csv(&mut curve)?;
    curve.flush()?;
    write_iterations_csv(&dir.join("iterations.csv"), &outcome.iterations)?;
    let mut events = create(&dir.join("events.jsonl"))?;
    for e in &outcome.events {
        serde_json::to_writer(&mut events, e)?;
        writeln!(events)?;
    }
    events.flush()?;
    let mut reports = create(&dir.join("reports.jsonl"))?;
    outcome.write_reports_jsonl(&mut reports)?;
    reports.flush()?;
    outcome.final_policy.save(&dir.join("final_policy.flat"))?;
    let epochs = dir.join("checkpoints");
    fs::create_dir_all(&epochs)?;
    for c in &outcome.last_epochs {
        c.params.save(&epochs.join(format!("epoch_{:02}.flat", c.epoch)))?;
    }
    let anchors = dir.join("anchors");
    fs::create_dir_all(&anchors)?;
    for c in &outcome.recent_anchors {
        c.params.save(&anchors.join(format!("anchor_{:04}.flat", c.iteration)))?;
    }
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Runs one seed of `cfg` and writes its artifacts under `dir`. A failed
/// candidate event leaves its state in `dir/failure/`.
pub fn run_seed(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<(RunOutcome, SeedSummary)> {
    let start = Instant::now();
    let result = run_experiment(&cfg.experiment(), seed);
    let wall = start.elapsed().as_secs_f64();
    let mut manifest = Manifest {
        config: RunConfig {
            seeds: vec![seed],
            ..cfg.clone()
        },
        config_toml: String::new(),
        seed,
        build_id: BUILD_ID.to_string(),
        wall_time_secs: wall,
        status: "ok".into(),
        train_env_steps: 0,
        eval_env_steps: 0,
        events: 0,
        swaps: 0,
        final_policy_checksum: None,
    };
    manifest.config_toml = manifest.config.to_toml()?;
    match result {
        Ok(outcome) => {
            let summary = SeedSummary::from_outcome(seed, &outcome, cfg.smoothing_window)?;
            write_run_artifacts(dir, &outcome)?;
            manifest.train_env_steps = summary.train_env_steps;
            manifest.eval_env_steps = summary.eval_env_steps;
            manifest.events = summary.events;
            manifest.swaps = summary.swaps;
            manifest.final_policy_checksum = Some(format!("{:016x}", outcome.final_policy.checksum()));
            write_manifest(dir, &manifest)?;
            Ok((outcome, summary))
        }
        Err(err) => {
            manifest.status = format!("failed: {err}");
            write_manifest(dir, &manifest)?;
            if let Error::EventFailed { dump, .. } = &err {
                let fail = dir.join("failure");
                fs::create_dir_all(&fail)?;
                dump.incumbent.save(&fail.join("incumbent.flat"))?;
                for (i, a) in dump.anchors.iter().enumerate() {
                    a.save(&fail.join(format!("anchor_{i:02}.flat")))?;
                }
                fs::write(fail.join("seeds.json"), serde_json::to_string(&dump.seeds)?)?;
            }
            Err(err)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub env: EnvId,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub max_smoothed_mean: f64,
    pub max_smoothed_std: f64,
    pub final_window_mean: f64,
    pub final_window_std: f64,
    pub mean_eval_env_steps: f64,
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub method: Method,
    pub seed: u64,
    pub result: std::result::Result<SeedSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub seeds: Vec<SeedResult>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.seeds.iter().filter(|s| s.result.is_err()).count()
    }

    pub fn row(&self, method: Method) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn summaries(&self, method: Method) -> Vec<&SeedSummary> {
        self.seeds
            .iter()
            .filter(|s| s.method == method)
            .filter_map(|s| s.result.as_ref().ok())
            .collect()
    }
}

pub const SUMMARY_HEADER: &str = "env,method,completed,failed,max_smoothed_mean,max_smoothed_std,final_window_mean,final_window_std,mean_eval_env_steps";
pub const SEEDS_HEADER: &str = "env,method,seed,status,max_smoothed,final_window_mean,train_env_steps,eval_env_steps,events,swaps";

/// Runs every `(method, seed)` pair as an independent job, continuing past
/// failures. Writes `summary.csv` and `seeds.csv` into `cfg.out` next to
/// the per-run directories.
pub fn run_suite(cfg: &RunConfig, methods: &[Method]) -> Result<SuiteReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::Empty("suite methods"));
    }
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let seeds: Vec<SeedResult> = jobs
        .par_iter()
        .map(|&(method, seed)| {
            let run_cfg = RunConfig {
                method,
                ..cfg.clone()
            };
            let dir = run_dir(&cfg.out, cfg.env, method, seed);
            let result = run_seed(&run_cfg, seed, &dir).map(|(_, s)| s).map_err(|e| e.to_string());
            SeedResult { method, seed, result }
        })
        .collect();

    let rows = methods
        .iter()
        .map(|&method| {
            let ok: Vec<&SeedSummary> = seeds
                .iter()
                .filter(|s| s.method == method)
                .filter_map(|s| s.result.as_ref().ok())
                .collect();
            let maxes: Vec<f64> = ok.iter().map(|s| s.max_smoothed).collect();
            let finals: Vec<f64> = ok.iter().map(|s| s.final_window_mean).collect();
            let evals: Vec<f64> = ok.iter().map(|s| s.eval_env_steps as f64).collect();
            let (max_smoothed_mean, max_smoothed_std) = mean_std(&maxes);
            let (final_window_mean, final_window_std) = mean_std(&finals);
            SuiteRow {
                env: cfg.env,
                method,
                completed: ok.len(),
                failed: cfg.seeds.len() - ok.len(),
                max_smoothed_mean,
                max_smoothed_std,
                final_window_mean,
                final_window_std,
                mean_eval_env_steps: mean_std(&evals).0,
            }
        })
        .collect();
    let report = SuiteReport { rows, seeds };
    write_suite_tables(&cfg.out, &report)?;
    Ok(report)
}

pub fn write_suite_tables(out: &Path, report: &SuiteReport) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("summary.csv"))?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.env,
            r.method,
            r.completed,
            r.failed,
            r.max_smoothed_mean,
            r.max_smoothed_std,
            r.final_window_mean,
            r.final_window_std,
            r.mean_eval_env_steps
        )?;
    }
    w.flush()?;
    let env = report.rows.first().map(|r| r.env);
    let mut w = create(&out.join("seeds.csv"))?;
    writeln!(w, "{SEEDS_HEADER}")?;
    for s in &report.seeds {
        let env = env.map(EnvId::as_str).unwrap_or("");
        match &s.result {
            Ok(x) => writeln!(
                w,
                "{env},{},{},ok,{},{},{},{},{},{}",
                s.method, s.seed, x.max_smoothed, x.final_window_mean, x.train_env_steps, x.eval_env_steps, x.events, x.swaps
            )?,
            Err(e) => writeln!(w, "{env},{},{},\"failed: {}\",,,,,,", s.method, s.seed, e.replace('"', "'"))?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::EventType;

    #[test]
    fn smoothing_rules() {
        assert_eq!(smooth(&[1.0, 2.0, 3.0], 3).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(smooth(&[4.0, -1.0, 2.5], 1).unwrap(), vec![4.0, -1.0, 2.5]);
        assert_eq!(smooth(&[7.0; 6], 4).unwrap(), vec![7.0; 6]);
        assert!(smooth(&[1.0], 0).is_err());
        let s = smooth(&[0.0, 0.0, 10.0, 0.0], 2).unwrap();
        assert_eq!(s.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 5.0);
    }

    #[test]
    fn sample_std_convention() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_curve_max_is_the_constant() {
        use crate::pipeline::CurveRow;
        let curve = TrainingCurve {
            rows: (0..30)
                .map(|i| CurveRow {
                    env_steps: i as u64 + 1,
                    iteration: 1,
                    episode_return: -3.25,
                    event_type: EventType::Train,
                })
                .collect(),
        };
        for w in [1, 5, 100] {
            assert_eq!(max_smoothed(&curve, w).unwrap(), -3.25);
        }
    }
}
