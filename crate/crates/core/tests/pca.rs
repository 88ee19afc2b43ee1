mod common;

use common::{closed_form_eigenvalues, covariance};
use explorler::viz::pca_project;
use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rand::Rng;

#[test]
fn explained_variance_matches_closed_form_3x3() {
    let mut rng = common::rng(31);
    for case in 0..20 {
        // Anisotropic clouds keep the spectrum well separated.
        let scales = [3.0, 1.5, 0.4];
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|j| scales[j] * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let c = covariance(&pts);
        let a = [[c[0][0], c[0][1], c[0][2]], [c[1][0], c[1][1], c[1][2]], [c[2][0], c[2][1], c[2][2]]];
        let eig = closed_form_eigenvalues(&a);
        let (basis, _) = pca_project(&pts, 2).unwrap();
        for k in 0..2 {
            assert!((basis.explained_variance[k] - eig[k]).abs() < 1e-8, "case {case} k {k}: {} vs {}", basis.explained_variance[k], eig[k]);
        }
        let sym = SymmetricEigen::new(Matrix3::from_fn(|i, j| a[i][j]));
        let mut ev: Vec<f64> = sym.eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        assert!((ev[0] - eig[0]).abs() < 1e-9 && (ev[2] - eig[2]).abs() < 1e-9);
    }
}

#[test]
fn reconstruction_is_no_worse_than_optimal_rank_two() {
    let mut rng = common::rng(77);
    for case in 0..20 {
        let n = rng.random_range(4..=10);
        let d = rng.random_range(3..=9);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| (j as f64 + 1.0) * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let (basis, coords) = pca_project(&pts, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let dot: f64 = basis.directions[a].iter().zip(&basis.directions[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        let err: f64 = pts
            .iter()
            .zip(&coords)
            .map(|(p, c)| p.iter().zip(basis.reconstruct(c)).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
            .sum();
        // Optimal rank-2 error: the discarded covariance eigenvalues.
        let c = covariance(&pts);
        let m = DMatrix::from_fn(d, d, |i, j| c[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        let optimal = ev[2..].iter().sum::<f64>() * (n as f64 - 1.0);
        assert!(err <= optimal + 1e-8 * (1.0 + optimal), "case {case}: {err} vs {optimal}");
        assert!((basis.explained_variance[0] - ev[0]).abs() < 1e-8 * ev[0].max(1.0));
        assert!((basis.explained_variance[1] - ev[1]).abs() < 1e-8 * ev[0].max(1.0));
    }
}
