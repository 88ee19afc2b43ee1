//! Train briefly, then map the return landscape around the last iteration's
//! epoch checkpoints in their two principal directions.
//!
//! ```text
//! cargo run --release --example contour_map -- [out_dir]
//! ```

use std::path::PathBuf;

use explorler::envs::EnvId;
use explorler::evaluator::Evaluator;
use explorler::harness::tools::write_contour_map;
use explorler::nn::{ActionMode, FlatParams};
use explorler::ppo::{PpoConfig, PpoTrainer};
use explorler::seeding::{stream_rng, Stream};
use explorler::viz::contour_anchor_map;

fn main() -> anyhow::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "contour".into()));
    let mut trainer = PpoTrainer::new(PpoConfig::pendulum(), EnvId::Pendulum.make(), 0)?;
    let mut checkpoints: Vec<FlatParams> = Vec::new();
    for _ in 0..15 {
        checkpoints = trainer.train_iteration()?.checkpoints.into_iter().map(|c| c.params).collect();
    }

    let evaluator = Evaluator::for_env(EnvId::Pendulum, 5, ActionMode::Deterministic);
    let mut rng = stream_rng(0, Stream::Viz);
    let seeds = evaluator.draw_seed_set(&mut rng);
    let map = contour_anchor_map(&checkpoints, 60, &evaluator, &seeds, 30, &mut rng)?;
    write_contour_map(&map, &out)?;

    let best = map.cloud_returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "explained variance {:?}, best sampled return {best:.2}; wrote {}",
        map.basis.explained_variance,
        out.join("contour.svg").display()
    );
    Ok(())
}
