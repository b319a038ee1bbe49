//! Remaining-uncertainty selection and the confidence-based stopping rule.

use alloc::vec::Vec;

use crate::design::argmax_lowest;
use crate::estimator::{lcb_ucb, WidthCalculator};
use crate::linalg;
use crate::model::{ArmSet, ArmStats, LinkFunction};
use crate::Result;

/// `min{−LCB, UCB}`, which equals `width − |zᵀθ̂|`.
pub fn remaining_uncertainty(z: &[f64], theta_hat: &[f64], width: f64) -> f64 {
    let (lcb, ucb) = lcb_ucb(z, theta_hat, width);
    (-lcb).min(ucb)
}

/// `width < |zᵀθ̂|`: the interval no longer touches zero.
pub fn stopping_check(z: &[f64], theta_hat: &[f64], width: f64) -> bool {
    width < libm::fabs(linalg::dot(z, theta_hat))
}

/// Remaining uncertainty of every arm with plug-in widths at `θ̂`.
pub fn remaining_uncertainties(
    arms: &ArmSet,
    data: &ArmStats,
    theta_hat: &[f64],
    delta: f64,
    link: LinkFunction,
) -> Result<Vec<f64>> {
    let widths = WidthCalculator::new(data, arms, theta_hat, link, delta)?;
    Ok((0..arms.len())
        .map(|i| {
            let z = arms.features(i);
            remaining_uncertainty(z, theta_hat, widths.width(z))
        })
        .collect())
}

/// Arm with the largest remaining uncertainty; lowest index on ties.
///
/// An empty `data` is allowed: widths then come from the jitter-only matrix.
pub fn greedy_step(arms: &ArmSet, data: &ArmStats, theta_hat: &[f64], delta: f64, link: LinkFunction) -> Result<usize> {
    Ok(argmax_lowest(&remaining_uncertainties(arms, data, theta_hat, delta, link)?))
}

/// True when every arm passes [`stopping_check`] with plug-in widths.
pub fn all_classified(arms: &ArmSet, data: &ArmStats, theta_hat: &[f64], delta: f64, link: LinkFunction) -> Result<bool> {
    let widths = WidthCalculator::new(data, arms, theta_hat, link, delta)?;
    Ok((0..arms.len()).all(|i| {
        let z = arms.features(i);
        stopping_check(z, theta_hat, widths.width(z))
    }))
}
