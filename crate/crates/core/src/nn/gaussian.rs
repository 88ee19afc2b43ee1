//! Diagonal Gaussian density helpers and their derivatives.

use crate::error::{Error, Result};

/// ½·log(2π)
pub const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// `Σ_d −(a_d−μ_d)²/(2σ_d²) − log σ_d − ½log 2π`
pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> Result<f64> {
    if mean.len() != log_std.len() || mean.len() != action.len() {
        return Err(Error::Dimension {
            context: "gaussian log-prob",
            expected: mean.len(),
            actual: if log_std.len() != mean.len() {
                log_std.len()
            } else {
                action.len()
            },
        });
    }
    let mut total = 0.0;
    for ((&m, &ls), &a) in mean.iter().zip(log_std).zip(action) {
        if !(m.is_finite() && ls.is_finite() && a.is_finite()) {
            return Err(Error::NonFinite("gaussian log-prob input".into()));
        }
        let z = (a - m) * (-ls).exp();
        total += -0.5 * z * z - ls - HALF_LOG_2PI;
    }
    Ok(total)
}

/// Partial derivatives of [`log_prob`] with respect to the mean and log-std,
/// scaled by `upstream` and accumulated into the output slices.
pub fn log_prob_backward(
    mean: &[f64],
    log_std: &[f64],
    action: &[f64],
    upstream: f64,
    d_mean: &mut [f64],
    d_log_std: &mut [f64],
) {
    for d in 0..mean.len() {
        let inv_var = (-2.0 * log_std[d]).exp();
        let diff = action[d] - mean[d];
        d_mean[d] += upstream * diff * inv_var;
        d_log_std[d] += upstream * (diff * diff * inv_var - 1.0);
    }
}

/// `Σ_d (½ + ½log 2π + log σ_d)`; its derivative in each `log σ_d` is 1.
pub fn entropy(log_std: &[f64]) -> Result<f64> {
    if log_std.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log_std".into()));
    }
    Ok(log_std.iter().map(|ls| 0.5 + HALF_LOG_2PI + ls).sum())
}
