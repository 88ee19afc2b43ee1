mod common;

use common::{flat, rng};
use explorler::esa::{
    esa_step, init_particles, knn, lj_force_magnitude, lj_potential, run_esa, EsaConfig,
};
use explorler::nn::flat::euclidean;
use explorler::candidates::Provenance;
use rand::Rng;

fn random_anchors(n: usize, d: usize, seed: u64) -> Vec<explorler::nn::FlatParams> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| flat(&(0..d).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<_>>()))
        .collect()
}

#[test]
fn potential_landmarks() {
    for (sigma, eps) in [(1.0, 1.0), (0.37, 2.5), (4.0, 0.1)] {
        assert!(lj_potential(sigma, sigma, eps).unwrap().abs() < 1e-9);
        let rmin = 2f64.powf(1.0 / 6.0) * sigma;
        assert!((lj_potential(rmin, sigma, eps).unwrap() + eps).abs() < 1e-9);
        // No sampled radius goes below the well depth.
        for k in 1..2000 {
            let r = sigma * (0.9 + k as f64 * 1e-3);
            assert!(lj_potential(r, sigma, eps).unwrap() >= -eps - 1e-12);
        }
        assert!(lj_force_magnitude(rmin * 0.99, sigma, eps).unwrap() > 0.0);
        assert!(lj_force_magnitude(rmin * 1.01, sigma, eps).unwrap() < 0.0);
        assert!(lj_force_magnitude(rmin, sigma, eps).unwrap().abs() < 1e-9);
    }
}

#[test]
fn force_is_negative_potential_derivative() {
    let (sigma, eps) = (0.8, 1.3);
    for r in [0.7, 0.85, 1.0, 1.4, 2.2] {
        let h = 1e-6;
        let numeric = -(lj_potential(r + h, sigma, eps).unwrap() - lj_potential(r - h, sigma, eps).unwrap()) / (2.0 * h);
        // The magnitude carries an extra σ² relative to −dV/dr.
        let analytic = lj_force_magnitude(r, sigma, eps).unwrap() / (sigma * sigma);
        assert!((numeric - analytic).abs() < 1e-5 * analytic.abs().max(1.0), "r={r}");
    }
}

#[test]
fn every_step_moves_exactly_alpha() {
    let anchors = random_anchors(10, 40, 1);
    let cfg = EsaConfig::default();
    let mut particles = init_particles(&anchors, &cfg, &mut rng(2)).unwrap();
    for _ in 0..25 {
        let before: Vec<Vec<f64>> = particles.iter().map(|p| p.position.clone()).collect();
        esa_step(&mut particles, &anchors, &cfg).unwrap();
        for (p, b) in particles.iter().zip(&before) {
            let moved = euclidean(&p.position, b);
            assert!((moved - cfg.step_size).abs() < 1e-15, "moved {moved}");
        }
    }
}

#[test]
fn candidate_count_and_release_steps() {
    let anchors = random_anchors(10, 30, 3);
    let cfg = EsaConfig::default();
    let set = run_esa(&anchors, &cfg, &mut rng(4)).unwrap();
    assert_eq!(set.len(), 20);
    assert_eq!(cfg.candidate_count(), 5 * (60 / 20 + 1));
    let mut steps: Vec<(usize, usize)> = set
        .iter()
        .map(|c| match c.provenance {
            Provenance::EsaInitial { particle } => (particle, 0),
            Provenance::EsaRelease { particle, step } => (particle, step),
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    steps.sort();
    let expected: Vec<(usize, usize)> = (0..5).flat_map(|p| [0, 20, 40, 60].map(|s| (p, s))).collect();
    assert_eq!(steps, expected);
    // A particle's release is exactly 20 steps of length alpha from its
    // previous one at most.
    for p in 0..5 {
        let track: Vec<_> = set
            .iter()
            .filter(|c| matches!(c.provenance, Provenance::EsaInitial { particle } | Provenance::EsaRelease { particle, .. } if particle == p))
            .collect();
        for w in track.windows(2) {
            assert!(w[0].params.distance(&w[1].params) <= 20.0 * cfg.step_size + 1e-12);
        }
    }
}

#[test]
fn search_is_identical_across_thread_counts() {
    let anchors = random_anchors(8, 64, 5);
    let cfg = EsaConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_esa(&anchors, &cfg, &mut rng(6)).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
}

#[test]
fn particles_leave_the_anchor_they_start_on() {
    let anchors = random_anchors(10, 20, 7);
    let cfg = EsaConfig {
        num_steps: 100,
        release_interval: 100,
        step_size: 0.01,
        ..EsaConfig::default()
    };
    let nearest = |x: &[f64]| {
        anchors
            .iter()
            .map(|a| euclidean(a.values(), x))
            .fold(f64::INFINITY, f64::min)
    };
    let set = run_esa(&anchors, &cfg, &mut rng(8)).unwrap();
    for p in 0..cfg.num_agents {
        let find = |want_initial: bool| {
            set.iter()
                .find(|c| match c.provenance {
                    Provenance::EsaInitial { particle } => want_initial && particle == p,
                    Provenance::EsaRelease { particle, .. } => !want_initial && particle == p,
                    _ => false,
                })
                .unwrap()
        };
        let start = nearest(find(true).params.values());
        let end = nearest(find(false).params.values());
        assert!(end > start, "particle {p}: {start} -> {end}");
    }
}

#[test]
fn knn_orders_by_distance_then_index() {
    let pts = [vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![3.0, 0.0]];
    let views: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
    let nn = knn(&[0.0, 0.0], &views, 3).unwrap();
    assert_eq!(nn.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(knn(&[0.0, 0.0], &views, 0).is_err() || knn(&[0.0, 0.0], &views, 0).unwrap().is_empty());
}
