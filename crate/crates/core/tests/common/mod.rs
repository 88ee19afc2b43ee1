#![allow(dead_code)]

use explorler::nn::{ActorCritic, FlatParams, LayoutEntry};
use explorler::ppo::{ppo_loss, ppo_loss_and_grad, MiniBatch, PpoConfig};
use explorler::rollout::RolloutBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn flat(values: &[f64]) -> FlatParams {
    FlatParams::new(values.to_vec(), vec![LayoutEntry::new("p", vec![values.len()])]).unwrap()
}

/// 4 → 3 → 3 → 2 policy and value nets.
pub fn small_nets(seed: u64) -> ActorCritic {
    let mut nets = ActorCritic::new(4, &[3, 3], vec![-1.0; 2], vec![1.0; 2], &mut rng(seed));
    nets.policy.log_std = vec![-0.3, 0.2];
    nets
}

pub fn small_cfg() -> PpoConfig {
    PpoConfig {
        entropy_coef: 0.01,
        value_coef: 0.5,
        hidden: vec![3, 3],
        ..PpoConfig::pendulum()
    }
}

/// A batch whose importance ratios are exactly `ratios` under `nets`.
pub fn batch_with_ratios(nets: &ActorCritic, ratios: &[f64], advantages: &[f64], seed: u64) -> MiniBatch {
    let mut r = rng(seed);
    let mut b = MiniBatch::default();
    for (&ratio, &adv) in ratios.iter().zip(advantages) {
        let obs: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let action: Vec<f64> = (0..2).map(|_| r.random_range(-1.5..1.5)).collect();
        let (mean, log_std) = nets.policy.forward(&obs).unwrap();
        let lp = explorler::nn::gaussian::log_prob(&mean, &log_std, &action).unwrap();
        b.obs.push(obs);
        b.actions.push(action);
        b.old_log_probs.push(lp - ratio.ln());
        b.advantages.push(adv);
        b.returns.push(r.random_range(-2.0..2.0));
    }
    b
}

fn loss_at(nets: &ActorCritic, values: &[f64], batch: &MiniBatch, cfg: &PpoConfig) -> f64 {
    let mut n = nets.clone();
    n.load_flat(&nets.flatten().with_values(values.to_vec()).unwrap()).unwrap();
    ppo_loss(&n, batch, cfg).unwrap().total
}

/// Compares the analytic loss gradient with central differences on every
/// parameter.
pub fn check_gradient(nets: &ActorCritic, batch: &MiniBatch, cfg: &PpoConfig) {
    let (_, grads) = ppo_loss_and_grad(nets, batch, cfg).unwrap();
    let analytic = grads.flatten();
    let base = nets.flatten().into_values();
    assert!(base.len() <= 200, "{} parameters", base.len());
    let h = 1e-6;
    for (i, &a) in analytic.values().iter().enumerate() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (loss_at(nets, &plus, batch, cfg) - loss_at(nets, &minus, batch, cfg)) / (2.0 * h);
        let err = (a - numeric).abs();
        let scale = a.abs().max(numeric.abs());
        assert!(
            err <= 1e-4 * scale || err < 1e-8,
            "param {i} ({}): analytic {a}, numeric {numeric}",
            analytic.layout().iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(",")
        );
    }
}

/// Truncated sum `Σ_l (γλ)^l δ_{t+l}`, stopping at the end of the episode
/// or the buffer.
pub fn gae_oracle(buffer: &RolloutBuffer, gamma: f64, lam: f64) -> Vec<f64> {
    let n = buffer.len();
    let v = |k: usize| {
        if k == n {
            buffer.bootstrap_value
        } else {
            buffer.transitions[k].value
        }
    };
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut coef = 1.0;
            for k in t..n {
                let tr = &buffer.transitions[k];
                let next = if tr.done { 0.0 } else { v(k + 1) };
                total += coef * (tr.reward + gamma * next - tr.value);
                if tr.done {
                    break;
                }
                coef *= gamma * lam;
            }
            total
        })
        .collect()
}

/// Eigenvalues of a symmetric 3×3 matrix, descending (trigonometric form).
pub fn closed_form_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Sample covariance matrix.
pub fn covariance(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let d = points[0].len();
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| points.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}
