//! A small multi-seed comparison driven by a TOML config, with summary
//! tables and a learning-curve chart.

use std::path::PathBuf;

use explorler::harness::config::{Overrides, RunConfig};
use explorler::harness::run::run_suite;
use explorler::harness::tools::plot;
use explorler::pipeline::Method;

const CONFIG: &str = r#"
env = "pointmass"
seeds = [0, 1]

[pipeline]
total_iterations = 30
"#;

fn main() -> anyhow::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "suite".into()));
    let cfg = RunConfig::parse(
        CONFIG,
        &Overrides {
            out: Some(out.clone()),
            ..Overrides::default()
        },
    )?;
    let report = run_suite(&cfg, &[Method::None, Method::Explorler, Method::RandomWalk])?;
    for r in &report.rows {
        println!(
            "{:<12} max smoothed {:>8.2} ± {:<6.2} final window {:>8.2} ± {:.2}",
            r.method.as_str(),
            r.max_smoothed_mean,
            r.max_smoothed_std,
            r.final_window_mean,
            r.final_window_std
        );
    }
    let env_dir = out.join(cfg.env.as_str());
    let inputs: Vec<PathBuf> = ["none", "explorler", "random_walk"].iter().map(|m| env_dir.join(m)).collect();
    plot(&inputs, cfg.smoothing_window, &out.join("curves.svg"))?;
    println!("tables and curves.svg in {}", out.display());
    Ok(())
}
