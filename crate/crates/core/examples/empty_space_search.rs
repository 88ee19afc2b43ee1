//! Particle search on synthetic anchors: particles start between anchors and
//! drift into the surrounding empty space.

use explorler::candidates::Provenance;
use explorler::esa::{run_esa, EsaConfig};
use explorler::nn::flat::euclidean;
use explorler::nn::{FlatParams, LayoutEntry};
use explorler::seeding::{stream_rng, Stream};
use rand::Rng;

fn main() -> explorler::Result<()> {
    let dim = 50;
    let mut rng = stream_rng(3, Stream::Esa);
    // Ten anchors along a noisy line, like consecutive training iterates.
    let anchors: Vec<FlatParams> = (0..10)
        .map(|i| {
            let v = (0..dim)
                .map(|j| 0.02 * i as f64 * (j as f64).cos() + rng.random_range(-0.005..0.005))
                .collect();
            FlatParams::new(v, vec![LayoutEntry::new("w", vec![dim])])
        })
        .collect::<Result<_, _>>()?;

    let cfg = EsaConfig {
        step_size: 0.002,
        ..EsaConfig::default()
    };
    let candidates = run_esa(&anchors, &cfg, &mut rng)?;
    println!("{} candidates from {} anchors", candidates.len(), anchors.len());
    for c in &candidates {
        let nearest = anchors
            .iter()
            .map(|a| euclidean(a.values(), c.params.values()))
            .fold(f64::INFINITY, f64::min);
        let label = match c.provenance {
            Provenance::EsaInitial { particle } => format!("particle {particle} start"),
            Provenance::EsaRelease { particle, step } => format!("particle {particle} step {step}"),
            other => format!("{other:?}"),
        };
        println!("{label:<22} nearest anchor {nearest:.4}");
    }
    Ok(())
}
