mod common;

use common::{batch_with_ratios, check_gradient as check, small_cfg, small_nets};
use explorler::ppo::{clipped_surrogate, ppo_loss, ppo_loss_and_grad, PpoConfig};

#[test]
fn gradient_matches_central_differences_inside_the_clip_band() {
    let cfg = small_cfg();
    for probe in 0..5 {
        let nets = small_nets(probe);
        let ratios = [0.9, 1.0, 1.05, 0.95, 1.1, 0.88];
        let advs = [1.0, -0.5, 2.0, -1.5, 0.3, 0.8];
        check(&nets, &batch_with_ratios(&nets, &ratios, &advs, 100 + probe), &cfg);
    }
}

#[test]
fn gradient_matches_central_differences_with_active_clipping() {
    let cfg = small_cfg();
    for probe in 0..5 {
        let nets = small_nets(10 + probe);
        // Clip binds on the first, third and fifth samples; the others sit
        // outside the band on the side where the unclipped term is smaller.
        let ratios = [1.5, 1.5, 0.5, 0.5, 1.35, 1.0];
        let advs = [1.0, -1.0, -2.0, 2.0, 0.7, -0.4];
        check(&nets, &batch_with_ratios(&nets, &ratios, &advs, 200 + probe), &cfg);
    }
}

#[test]
fn clipped_samples_contribute_no_policy_gradient() {
    let cfg = PpoConfig {
        entropy_coef: 0.0,
        value_coef: 0.0,
        ..small_cfg()
    };
    let nets = small_nets(3);
    let batch = batch_with_ratios(&nets, &[1.5, 0.5, 1.21, 0.7], &[1.0, -1.0, 3.0, -0.1], 9);
    let (terms, grads) = ppo_loss_and_grad(&nets, &batch, &cfg).unwrap();
    assert!(grads.policy.flatten().values().iter().all(|&g| g == 0.0));
    assert!(grads.value.net.params().all(|g| g == 0.0));
    let expected = -(1.2 * 1.0 + 0.8 * -1.0 + 1.2 * 3.0 + 0.8 * -0.1) / 4.0;
    assert!((terms.policy - expected).abs() < 1e-12);
}

#[test]
fn surrogate_hand_cases() {
    assert_eq!(clipped_surrogate(1.0, 1.0, 0.2).0, 1.0);
    assert!((clipped_surrogate(1.5, 1.0, 0.2).0 - 1.2).abs() < 1e-15);
    assert!((clipped_surrogate(0.5, -1.0, 0.2).0 + 0.8).abs() < 1e-15);
    assert_eq!(clipped_surrogate(1.5, 1.0, 0.2).1, 0.0);
    assert_eq!(clipped_surrogate(1.1, -2.0, 0.2).1, -2.0);
}

#[test]
fn identity_ratio_policy_term() {
    let cfg = small_cfg();
    let nets = small_nets(0);
    let batch = batch_with_ratios(&nets, &[1.0; 5], &[1.0; 5], 1);
    assert!((ppo_loss(&nets, &batch, &cfg).unwrap().policy + 1.0).abs() < 1e-12);
}
