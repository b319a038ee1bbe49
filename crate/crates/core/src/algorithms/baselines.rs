//! Selection rules shared by the sequential and batched runners.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::greedy::remaining_uncertainty;
use crate::design::argmax_lowest;
use crate::estimator::WidthCalculator;
use crate::linalg;
use crate::model::{self, ArmSet, ArmStats, LinkFunction};
use crate::{CoreError, Result};

/// Default LCB threshold of selective sampling.
pub const DEFAULT_SELECTIVE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy {
    /// Largest remaining uncertainty.
    OursGreedy,
    Random,
    /// Smallest `|zᵀθ̂|`.
    Uncertainty,
    /// First arm, in shuffled order, whose LCB is below the threshold.
    Selective { threshold: f64 },
    /// Widest confidence ellipsoid direction.
    Apo,
    /// Largest determinant gain.
    DOptimal,
}

impl SelectionStrategy {
    pub const ALL_NAMES: [&'static str; 6] = ["ours-greedy", "random", "uncertainty", "selective", "apo", "d-optimal"];

    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::OursGreedy => "ours-greedy",
            SelectionStrategy::Random => "random",
            SelectionStrategy::Uncertainty => "uncertainty",
            SelectionStrategy::Selective { .. } => "selective",
            SelectionStrategy::Apo => "apo",
            SelectionStrategy::DOptimal => "d-optimal",
        }
    }

    /// Strategies that rank arms by a deterministic score.
    pub fn is_score_based(&self) -> bool {
        !matches!(self, SelectionStrategy::Random | SelectionStrategy::Selective { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let SelectionStrategy::Selective { threshold } = self {
            if !threshold.is_finite() {
                return Err(CoreError::InvalidParameter("selective threshold must be finite"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionStrategy {
    type Err = CoreError;

    /// Parses the names in [`SelectionStrategy::ALL_NAMES`]; `selective`
    /// gets the default threshold.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ours-greedy" | "ours" | "greedy" => SelectionStrategy::OursGreedy,
            "random" => SelectionStrategy::Random,
            "uncertainty" => SelectionStrategy::Uncertainty,
            "selective" => SelectionStrategy::Selective { threshold: DEFAULT_SELECTIVE_THRESHOLD },
            "apo" => SelectionStrategy::Apo,
            "d-optimal" | "doptimal" => SelectionStrategy::DOptimal,
            _ => return Err(CoreError::InvalidParameter("unknown selection strategy")),
        })
    }
}

/// Per-arm ranking scores of a score-based strategy (larger is preferred).
pub fn strategy_scores(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    data: &ArmStats,
    theta_hat: &[f64],
    delta: f64,
    link: LinkFunction,
) -> Result<Vec<f64>> {
    let n = arms.len();
    Ok(match strategy {
        SelectionStrategy::OursGreedy => {
            let w = WidthCalculator::new(data, arms, theta_hat, link, delta)?;
            (0..n)
                .map(|i| {
                    let z = arms.features(i);
                    remaining_uncertainty(z, theta_hat, w.width(z))
                })
                .collect()
        }
        SelectionStrategy::Uncertainty => {
            (0..n).map(|i| -libm::fabs(linalg::dot(arms.features(i), theta_hat))).collect()
        }
        SelectionStrategy::Apo => {
            let chol = model::fisher_data_or_prior(data, theta_hat, arms, link)?.factor()?;
            (0..n).map(|i| libm::sqrt(chol.inv_quad(arms.features(i)))).collect()
        }
        SelectionStrategy::DOptimal => {
            let chol = model::fisher_data_or_prior(data, theta_hat, arms, link)?.factor()?;
            let curv = link.curvatures(arms, theta_hat)?;
            (0..n).map(|i| curv[i] * chol.inv_quad(arms.features(i))).collect()
        }
        SelectionStrategy::Random | SelectionStrategy::Selective { .. } => {
            return Err(CoreError::InvalidParameter("strategy has no deterministic score"))
        }
    })
}

/// Lower confidence bounds for selective sampling.
pub(crate) fn lower_bounds(
    arms: &ArmSet,
    data: &ArmStats,
    theta_hat: &[f64],
    delta: f64,
    link: LinkFunction,
) -> Result<Vec<f64>> {
    let w = WidthCalculator::new(data, arms, theta_hat, link, delta)?;
    Ok((0..arms.len())
        .map(|i| {
            let z = arms.features(i);
            linalg::dot(z, theta_hat) - w.width(z)
        })
        .collect())
}

/// One draw of a randomized strategy, restricted to `available` arms when
/// given. `lcbs` is required for selective. Panics if no arm is available.
pub(crate) fn draw<R: Rng + ?Sized>(
    strategy: SelectionStrategy,
    n: usize,
    lcbs: Option<&[f64]>,
    available: Option<&[bool]>,
    rng: &mut R,
) -> usize {
    let pool: Vec<usize> = match available {
        Some(mask) => (0..n).filter(|&i| mask[i]).collect(),
        None => (0..n).collect(),
    };
    match (strategy, lcbs) {
        (SelectionStrategy::Selective { threshold }, Some(lcbs)) => {
            let mut order = pool.clone();
            order.shuffle(rng);
            match order.into_iter().find(|&i| lcbs[i] < threshold) {
                Some(i) => i,
                None => pool[rng.random_range(0..pool.len())],
            }
        }
        _ => pool[rng.random_range(0..pool.len())],
    }
}

/// Picks the next arm for any strategy. Score-based strategies break ties
/// toward the lowest index; randomized ones consume `rng`.
pub fn baseline_step<R: Rng + ?Sized>(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    data: &ArmStats,
    theta_hat: &[f64],
    delta: f64,
    link: LinkFunction,
    rng: &mut R,
) -> Result<usize> {
    select_next(strategy, arms, data, theta_hat, delta, link, None, rng)
}

/// [`baseline_step`] restricted to the arms flagged in `available`.
#[allow(clippy::too_many_arguments)]
pub fn select_next<R: Rng + ?Sized>(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    data: &ArmStats,
    theta_hat: &[f64],
    delta: f64,
    link: LinkFunction,
    available: Option<&[bool]>,
    rng: &mut R,
) -> Result<usize> {
    strategy.validate()?;
    if let Some(mask) = available {
        if mask.len() != arms.len() {
            return Err(CoreError::DimensionMismatch { expected: arms.len(), found: mask.len() });
        }
        if !mask.iter().any(|a| *a) {
            return Err(CoreError::Empty("no arm is available"));
        }
    }
    if strategy.is_score_based() {
        let mut scores = strategy_scores(strategy, arms, data, theta_hat, delta, link)?;
        if let Some(mask) = available {
            mask_scores(&mut scores, mask);
        }
        return Ok(argmax_lowest(&scores));
    }
    let lcbs = match strategy {
        SelectionStrategy::Selective { .. } => Some(lower_bounds(arms, data, theta_hat, delta, link)?),
        _ => None,
    };
    Ok(draw(strategy, arms.len(), lcbs.as_deref(), available, rng))
}

/// Sends unavailable arms to the bottom of any ranking.
pub(crate) fn mask_scores(scores: &mut [f64], available: &[bool]) {
    for (s, a) in scores.iter_mut().zip(available) {
        if !a {
            *s = f64::NEG_INFINITY;
        }
    }
}
