use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use explorler::envs::EnvId;
use explorler::harness::config::{Overrides, RunConfig};
use explorler::harness::run::{run_dir, run_seed, run_suite};
use explorler::harness::tools::{eval_file, explore, plot, visualize, VisualizeOptions};
use explorler::nn::ActionMode;
use explorler::pipeline::Method;

#[derive(Parser)]
#[command(version, about = "PPO with iteration-level empty-space search")]
struct Cli {
    /// Worker threads for candidate evaluation and suite jobs.
    #[arg(long, global = true, env = "EXPLORLER_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; missing keys take per-environment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvId>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, method: Option<Method>, seeds: Option<Vec<u64>>) -> anyhow::Result<RunConfig> {
        let overrides = Overrides {
            env: self.env,
            method,
            seeds,
            out: self.out.clone(),
        };
        Ok(match &self.config {
            Some(path) => RunConfig::load(path, &overrides)?,
            None => RunConfig::parse("", &overrides)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed with any method.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Particle search around a directory of saved checkpoints.
    Explore {
        #[command(flatten)]
        common: Common,
        /// Directory of `.flat` anchor checkpoints.
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a saved policy file.
    Eval {
        file: PathBuf,
        #[arg(long, default_value = "pendulum")]
        env: EnvId,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample actions instead of using the Gaussian mean.
        #[arg(long)]
        stochastic: bool,
    },
    /// Contour-anchor map around a directory of epoch checkpoints.
    Visualize {
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long, default_value = "pendulum")]
        env: EnvId,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 40)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "viz")]
        out: PathBuf,
    },
    /// Run several seeds (and methods) and write summary tables.
    Suite {
        #[command(flatten)]
        common: Common,
        /// One method or a comma-separated list.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        /// Comma-separated seeds; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
    },
    /// Chart curve CSVs (files or run directories) as SVG.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value = "curves.svg")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Train { common, method, seed } => {
            let cfg = common.resolve(method, Some(vec![seed]))?;
            let dir = run_dir(&cfg.out, cfg.env, cfg.method, seed);
            let (_, s) = run_seed(&cfg, seed, &dir)?;
            println!(
                "{} {} seed {seed}: max smoothed {:.3}, final window {:.3}, {} train + {} eval steps, {} events ({} swaps) -> {}",
                cfg.env,
                cfg.method,
                s.max_smoothed,
                s.final_window_mean,
                s.train_env_steps,
                s.eval_env_steps,
                s.events,
                s.swaps,
                dir.display()
            );
        }
        Command::Explore { common, anchors, seed } => {
            let cfg = common.resolve(None, None)?;
            let out = common.out.unwrap_or_else(|| PathBuf::from("candidates"));
            let manifest = explore(&anchors, &cfg.esa, seed, &out)?;
            println!(
                "{} candidates from {} anchors -> {}",
                manifest.candidates.len(),
                manifest.anchors.len(),
                out.display()
            );
        }
        Command::Eval {
            file,
            env,
            episodes,
            seed,
            stochastic,
        } => {
            let mode = if stochastic {
                ActionMode::Stochastic
            } else {
                ActionMode::Deterministic
            };
            let report = eval_file(&file, env, episodes, seed, mode)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Visualize {
            checkpoints,
            env,
            samples,
            episodes,
            resolution,
            seed,
            out,
        } => {
            let opts = VisualizeOptions {
                env,
                samples,
                episodes,
                resolution,
                seed,
            };
            let map = visualize(&checkpoints, &opts, &out)?;
            let best = map.cloud_returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!("{} samples, best mean return {best:.3} -> {}", map.cloud_returns.len(), out.display());
        }
        Command::Suite { common, method, seed } => {
            let seeds = (!seed.is_empty()).then_some(seed);
            let cfg = common.resolve(None, seeds)?;
            let methods = if method.is_empty() { vec![cfg.method] } else { method };
            let report = run_suite(&cfg, &methods)?;
            for r in &report.rows {
                println!(
                    "{} {}: max smoothed {:.3} ± {:.3}, final window {:.3} ± {:.3} ({} ok, {} failed)",
                    r.env,
                    r.method,
                    r.max_smoothed_mean,
                    r.max_smoothed_std,
                    r.final_window_mean,
                    r.final_window_std,
                    r.completed,
                    r.failed
                );
            }
            for s in &report.seeds {
                if let Err(e) = &s.result {
                    eprintln!("{} seed {} failed: {e}", s.method, s.seed);
                }
            }
            if report.failures() > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Plot { inputs, window, out } => {
            let series = plot(&inputs, window, &out)?;
            println!("{} series -> {}", series.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
