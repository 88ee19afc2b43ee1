mod common;

use common::gae_oracle;
use explorler::rollout::{compute_gae, RolloutBuffer, Transition};
use rand::Rng;

#[test]
fn gae_matches_truncated_sums_on_random_buffers() {
    let mut rng = common::rng(2024);
    for case in 0..100 {
        let n = rng.random_range(1..=120);
        let buffer = RolloutBuffer {
            transitions: (0..n)
                .map(|_| Transition {
                    obs: vec![],
                    action: vec![],
                    reward: rng.random_range(-2.0..1.0),
                    done: rng.random_bool(0.08),
                    log_prob: 0.0,
                    value: rng.random_range(-10.0..5.0),
                })
                .collect(),
            bootstrap_value: rng.random_range(-10.0..5.0),
            ..Default::default()
        };
        let gamma = rng.random_range(0.5..0.999);
        let lam = rng.random_range(0.0..=1.0);
        let (adv, ret) = compute_gae(&buffer, gamma, lam).unwrap();
        let oracle = gae_oracle(&buffer, gamma, lam);
        for t in 0..n {
            assert!((adv[t] - oracle[t]).abs() < 1e-10, "case {case} t {t}: {} vs {}", adv[t], oracle[t]);
            assert!((ret[t] - (oracle[t] + buffer.transitions[t].value)).abs() < 1e-10);
        }
    }
}
