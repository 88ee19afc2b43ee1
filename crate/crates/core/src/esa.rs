//! Empty-space search over flattened policy parameters.
//!
//! Particles start between anchor checkpoints and are pushed by
//! Lennard-Jones forces from their nearest anchors: repelled when closer
//! than the local effective diameter, attracted back when farther. Each
//! step moves a particle a fixed distance along its momentum direction;
//! positions are released as candidate policies at a fixed interval.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{Candidate, CandidateSet, Provenance};
use crate::error::{Error, Result};
use crate::nn::flat::{euclidean, norm};
use crate::nn::FlatParams;
use crate::seeding::child_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsaConfig {
    pub num_agents: usize,
    pub num_neighbors: usize,
    pub num_steps: usize,
    pub step_size: f64,
    pub release_interval: usize,
    pub momentum_beta: f64,
    pub lj_epsilon: f64,
}

impl Default for EsaConfig {
    fn default() -> Self {
        Self {
            num_agents: 5,
            num_neighbors: 6,
            num_steps: 60,
            step_size: 0.001,
            release_interval: 20,
            momentum_beta: 0.9,
            lj_epsilon: 1.0,
        }
    }
}

impl EsaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: format!("esa.{key}"),
                message: message.to_string(),
            })
        };
        if self.num_agents == 0 {
            return bad("num_agents", "must be at least 1");
        }
        if self.num_neighbors == 0 {
            return bad("num_neighbors", "must be at least 1");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size", "must be positive");
        }
        if self.release_interval == 0 || self.num_steps % self.release_interval != 0 {
            return bad("release_interval", "must be positive and divide num_steps");
        }
        if !(0.0..1.0).contains(&self.momentum_beta) {
            return bad("momentum_beta", "must lie in [0, 1)");
        }
        if !(self.lj_epsilon > 0.0 && self.lj_epsilon.is_finite()) {
            return bad("lj_epsilon", "must be positive");
        }
        Ok(())
    }

    /// `m · (s / release_interval + 1)`
    pub fn candidate_count(&self) -> usize {
        self.num_agents * (self.num_steps / self.release_interval + 1)
    }
}

/// The `n` anchors nearest to `point`, ascending by distance; ties go to the
/// lower index.
pub fn knn(point: &[f64], anchors: &[&[f64]], n: usize) -> Result<Vec<(usize, f64)>> {
    if anchors.is_empty() {
        return Err(Error::Empty("anchor set"));
    }
    if n > anchors.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {n} neighbours among {} anchors",
            anchors.len()
        )));
    }
    let mut dists: Vec<(usize, f64)> = anchors
        .iter()
        .enumerate()
        .map(|(i, a)| (i, euclidean(point, a)))
        .collect();
    dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    dists.truncate(n);
    Ok(dists)
}

/// `4ε[(σ/r)¹² − (σ/r)⁶]`
pub fn lj_potential(r: f64, sigma: f64, lj_epsilon: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("separation must be positive, got {r}")));
    }
    let s6 = (sigma / r).powi(6);
    Ok(4.0 * lj_epsilon * (s6 * s6 - s6))
}

/// Signed force magnitude `24εσ[2(σ/r)¹³ − (σ/r)⁷]`; positive pushes away
/// from the neighbour.
pub fn lj_force_magnitude(r: f64, sigma: f64, lj_epsilon: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("separation must be positive, got {r}")));
    }
    let x = sigma / r;
    Ok(24.0 * lj_epsilon * sigma * (2.0 * x.powi(13) - x.powi(7)))
}

/// Force vector along `u_hat`, the unit vector from the neighbour to the
/// particle.
pub fn lj_force(r: f64, sigma: f64, lj_epsilon: f64, u_hat: &[f64]) -> Result<Vec<f64>> {
    let len = norm(u_hat);
    if !(len >= 1.0 - 1e-9 && len <= 1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!("direction is not unit length ({len})")));
    }
    let magnitude = lj_force_magnitude(r, sigma, lj_epsilon)?;
    Ok(u_hat.iter().map(|u| magnitude * u).collect())
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub id: usize,
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Effective diameter: mean distance to the nearest anchors.
    pub sigma: f64,
    rng: ChaCha8Rng,
}

impl Particle {
    pub fn new(id: usize, position: Vec<f64>, rng: ChaCha8Rng) -> Self {
        let dim = position.len();
        Self {
            id,
            position,
            momentum: vec![0.0; dim],
            sigma: 0.0,
            rng,
        }
    }
}

const SIGMA_FLOOR: f64 = 1e-12;

fn anchor_views(anchors: &[FlatParams]) -> Vec<&[f64]> {
    anchors.iter().map(FlatParams::values).collect()
}

fn local_sigma(position: &[f64], anchors: &[&[f64]], n: usize) -> Result<f64> {
    let neighbours = knn(position, anchors, n.min(anchors.len()))?;
    let mean = neighbours.iter().map(|(_, d)| d).sum::<f64>() / neighbours.len() as f64;
    Ok(mean.max(SIGMA_FLOOR))
}

/// Mean distance over all anchor pairs.
pub fn mean_pairwise_distance(anchors: &[&[f64]]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..anchors.len() {
        for j in i + 1..anchors.len() {
            total += euclidean(anchors[i], anchors[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Places `cfg.num_agents` particles on random anchor-pair segments, with a
/// small isotropic jitter whose expected norm is 5% of the mean pairwise
/// anchor distance.
pub fn init_particles(anchors: &[FlatParams], cfg: &EsaConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Particle>> {
    if anchors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "particle initialisation needs at least two anchors, got {}",
            anchors.len()
        )));
    }
    check_layouts(anchors)?;
    let views = anchor_views(anchors);
    let dim = views[0].len();
    let jitter_std = 0.05 * mean_pairwise_distance(&views) / (dim.max(1) as f64).sqrt();
    let mut particles = Vec::with_capacity(cfg.num_agents);
    for id in 0..cfg.num_agents {
        let i = rng.random_range(0..anchors.len());
        let mut j = rng.random_range(0..anchors.len() - 1);
        if j >= i {
            j += 1;
        }
        let lambda: f64 = rng.random_range(0.25..0.75);
        let position: Vec<f64> = views[i]
            .iter()
            .zip(views[j])
            .map(|(a, b)| {
                let noise: f64 = rng.sample(StandardNormal);
                lambda * a + (1.0 - lambda) * b + jitter_std * noise
            })
            .collect();
        let mut p = Particle::new(id, position, child_rng(rng));
        p.sigma = local_sigma(&p.position, &views, cfg.num_neighbors)?;
        particles.push(p);
    }
    Ok(particles)
}

fn check_layouts(anchors: &[FlatParams]) -> Result<()> {
    if anchors.iter().any(|a| !a.same_layout(&anchors[0])) {
        return Err(Error::Layout("anchors do not share one layout".into()));
    }
    Ok(())
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

/// Summed LJ force on `particle` from its nearest anchors, using (and
/// refreshing) the particle's effective diameter.
fn particle_force(particle: &mut Particle, anchors: &[&[f64]], cfg: &EsaConfig) -> Result<Vec<f64>> {
    let neighbours = knn(&particle.position, anchors, cfg.num_neighbors.min(anchors.len()))?;
    let mean = neighbours.iter().map(|(_, d)| d).sum::<f64>() / neighbours.len() as f64;
    particle.sigma = mean.max(SIGMA_FLOOR);
    let dim = particle.position.len();
    let mut force = vec![0.0; dim];
    for &(k, r) in &neighbours {
        if r == 0.0 {
            let u = random_unit(dim, &mut particle.rng);
            force.iter_mut().zip(&u).for_each(|(f, u)| *f += u);
            continue;
        }
        let magnitude = lj_force_magnitude(r, particle.sigma, cfg.lj_epsilon)?;
        for ((f, x), a) in force.iter_mut().zip(&particle.position).zip(anchors[k]) {
            *f += magnitude * (x - a) / r;
        }
    }
    Ok(force)
}

/// Moves one particle by exactly `step_size` along its momentum direction
/// (or not at all when the momentum vanishes).
fn advance(particle: &mut Particle, force: &[f64], cfg: &EsaConfig) {
    let f_norm = norm(force);
    let beta = cfg.momentum_beta;
    for (m, f) in particle.momentum.iter_mut().zip(force) {
        let d = if f_norm > 0.0 { f / f_norm } else { 0.0 };
        *m = beta * *m + (1.0 - beta) * d;
    }
    let m_norm = norm(&particle.momentum);
    if m_norm > 1e-12 {
        let scale = cfg.step_size / m_norm;
        for (x, m) in particle.position.iter_mut().zip(&particle.momentum) {
            *x += scale * m;
        }
    }
}

/// One synchronous update of every particle. Particles do not interact, so
/// they are advanced in parallel.
pub fn esa_step(particles: &mut [Particle], anchors: &[FlatParams], cfg: &EsaConfig) -> Result<()> {
    let views = anchor_views(anchors);
    particles.par_iter_mut().try_for_each(|p| {
        let force = particle_force(p, &views, cfg)?;
        if force.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite(format!("force on particle {}", p.id)));
        }
        advance(p, &force, cfg);
        Ok(())
    })
}

/// Full search: initial positions plus a release every `release_interval`
/// steps, `m · (s / release_interval + 1)` candidates in total.
pub fn run_esa(anchors: &[FlatParams], cfg: &EsaConfig, rng: &mut ChaCha8Rng) -> Result<CandidateSet> {
    cfg.validate()?;
    if anchors.is_empty() {
        return Err(Error::Empty("anchor set"));
    }
    let mut particles = init_particles(anchors, cfg, rng)?;
    let layout = anchors[0].layout().to_vec();
    let release = |p: &Particle, provenance| -> Result<Candidate> {
        Ok(Candidate::new(
            FlatParams::new(p.position.clone(), layout.clone())?,
            provenance,
        ))
    };
    let mut candidates = Vec::with_capacity(cfg.candidate_count());
    for p in &particles {
        candidates.push(release(p, Provenance::EsaInitial { particle: p.id })?);
    }
    for step in 1..=cfg.num_steps {
        esa_step(&mut particles, anchors, cfg)?;
        if step % cfg.release_interval == 0 {
            for p in &particles {
                candidates.push(release(p, Provenance::EsaRelease { particle: p.id, step })?);
            }
        }
    }
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayoutEntry;
    use rand::SeedableRng;

    fn point(v: &[f64]) -> FlatParams {
        FlatParams::new(v.to_vec(), vec![LayoutEntry::new("x", vec![v.len()])]).unwrap()
    }

    #[test]
    fn knn_on_a_line() {
        let anchors: [&[f64]; 3] = [&[0.0], &[1.0], &[3.0]];
        let nn = knn(&[0.9], &anchors, 2).unwrap();
        assert_eq!(nn[0].0, 1);
        assert_eq!(nn[1].0, 0);
        assert!((nn[0].1 - 0.1).abs() < 1e-12 && (nn[1].1 - 0.9).abs() < 1e-12);
        assert_eq!(knn(&[3.0], &anchors, 1).unwrap(), vec![(2, 0.0)]);
        let all = knn(&[10.0], &anchors, 3).unwrap();
        assert_eq!(all.iter().map(|x| x.0).collect::<Vec<_>>(), vec![2, 1, 0]);
        assert!(knn(&[0.0], &[], 1).is_err());
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let anchors: [&[f64]; 3] = [&[2.0], &[-2.0], &[0.0]];
        let nn = knn(&[0.0], &anchors, 3).unwrap();
        assert_eq!(nn.iter().map(|x| x.0).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn potential_landmarks() {
        let (s, e) = (1.7, 0.6);
        assert!(lj_potential(s, s, e).unwrap().abs() < 1e-12);
        let rmin = 2f64.powf(1.0 / 6.0) * s;
        assert!((lj_potential(rmin, s, e).unwrap() + e).abs() < 1e-9);
        let far = lj_potential(1e3 * s, s, e).unwrap();
        assert!(far < 0.0 && far > -1e-15);
        assert!(lj_potential(0.0, s, e).is_err());
    }

    #[test]
    fn force_landmarks() {
        let (s, e) = (0.8, 1.3);
        let u = [0.6, 0.8];
        let at_sigma = lj_force(s, s, e, &u).unwrap();
        assert!((at_sigma[0] - 24.0 * e * s * 0.6).abs() < 1e-12);
        let rmin = 2f64.powf(1.0 / 6.0) * s;
        assert!(lj_force_magnitude(rmin, s, e).unwrap().abs() < 1e-12);
        let two = lj_force_magnitude(2.0 * s, s, e).unwrap();
        let expected = 24.0 * e * s * (2.0 * 2f64.powi(-13) - 2f64.powi(-7));
        assert!((two - expected).abs() < 1e-15);
        assert!((2.0 * 2f64.powi(-13) - 2f64.powi(-7) + 0.007_568_359_375).abs() < 1e-12);
        assert!(lj_force(s, s, e, &[1.0, 1.0]).is_err());
        assert!(lj_force(-1.0, s, e, &u).is_err());
    }

    #[test]
    fn identical_anchors_pin_particles() {
        let anchors = vec![point(&[0.5, -1.0]), point(&[0.5, -1.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ps = init_particles(&anchors, &EsaConfig::default(), &mut rng).unwrap();
        assert_eq!(ps.len(), 5);
        assert!(ps.iter().all(|p| p.position == vec![0.5, -1.0]));
    }

    #[test]
    fn init_needs_two_anchors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(init_particles(&[point(&[0.0])], &EsaConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn single_anchor_repulsion_moves_exactly_alpha() {
        // With one neighbour the recomputed σ equals r, which sits inside the
        // repulsive range (r < 2^{1/6}σ).
        let anchors = vec![point(&[0.0, 0.0])];
        let cfg = EsaConfig {
            num_neighbors: 1,
            momentum_beta: 0.0,
            ..Default::default()
        };
        let mut ps = vec![Particle::new(0, vec![0.3, 0.4], ChaCha8Rng::seed_from_u64(1))];
        esa_step(&mut ps, &anchors, &cfg).unwrap();
        assert!((ps[0].position[0] - (0.3 + 0.001 * 0.6)).abs() < 1e-15);
        assert!((ps[0].position[1] - (0.4 + 0.001 * 0.8)).abs() < 1e-15);
        assert!((ps[0].sigma - 0.5).abs() < 1e-15);

        // Hand-built force at r = σ/2 also points away from the anchor.
        let m = lj_force_magnitude(0.5, 1.0, 1.0).unwrap();
        assert!(m > 0.0);
        let mut p = Particle::new(1, vec![0.3, 0.4], ChaCha8Rng::seed_from_u64(2));
        advance(&mut p, &[m * 0.6, m * 0.8], &cfg);
        assert!((norm(&p.position) - 0.501).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_balances() {
        let anchors = vec![point(&[-1.0, 0.0]), point(&[1.0, 0.0])];
        let cfg = EsaConfig {
            num_neighbors: 2,
            ..Default::default()
        };
        let mut ps = vec![Particle::new(0, vec![0.0, 0.0], ChaCha8Rng::seed_from_u64(0))];
        esa_step(&mut ps, &anchors, &cfg).unwrap();
        assert_eq!(ps[0].position, vec![0.0, 0.0]);
    }

    #[test]
    fn coincident_particle_gets_pushed_off() {
        let anchors = vec![point(&[1.0, 1.0]), point(&[1.0, 1.0])];
        let cfg = EsaConfig {
            num_neighbors: 2,
            momentum_beta: 0.0,
            ..Default::default()
        };
        let mut ps = vec![Particle::new(0, vec![1.0, 1.0], ChaCha8Rng::seed_from_u64(4))];
        esa_step(&mut ps, &anchors, &cfg).unwrap();
        let moved = euclidean(&ps[0].position, &[1.0, 1.0]);
        assert!((moved - 0.001).abs() < 1e-12);
    }

    #[test]
    fn candidate_counts() {
        let anchors: Vec<_> = (0..10)
            .map(|i| point(&[i as f64 * 0.1, (i as f64).sin(), 0.3 * i as f64]))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = run_esa(&anchors, &EsaConfig::default(), &mut rng).unwrap();
        assert_eq!(set.len(), 20);
        let cfg = EsaConfig {
            num_steps: 0,
            ..Default::default()
        };
        let set = run_esa(&anchors, &cfg, &mut rng).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.iter().all(|c| matches!(c.provenance, Provenance::EsaInitial { .. })));
    }

    #[test]
    fn seeded_search_is_reproducible() {
        let anchors: Vec<_> = (0..6).map(|i| point(&[i as f64, (i * i) as f64 * 0.1])).collect();
        let run = || run_esa(&anchors, &EsaConfig::default(), &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        let cfg = EsaConfig {
            release_interval: 7,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(EsaConfig::default().candidate_count(), 20);
    }
}
