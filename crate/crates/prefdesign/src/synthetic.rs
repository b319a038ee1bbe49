//! Seeded instance generators.

use prefdesign_core::model::{normalize_armset, ArmSet, LinkFunction, TrueModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::PreferenceData;
use crate::error::{HarnessError, Result};

/// Total proposals [`make_synthetic`] may draw before giving up.
pub const MAX_DRAWS: usize = 100_000;

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform draw from the closed unit ball.
fn unit_ball(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let radius = rng.random::<f64>().powf(1.0 / d as f64);
    unit_direction(rng, d).into_iter().map(|x| x * radius).collect()
}

/// Logistic instance with a unit `θ*` and `n` arms from the unit ball, each
/// kept only if `|zᵀθ*| ≥ margin`.
pub fn make_synthetic(d: usize, n: usize, margin: f64, seed: u64) -> Result<(ArmSet, TrueModel)> {
    if d == 0 || n < d {
        return Err(HarnessError::config("synthetic instances need d >= 1 and n >= d"));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(HarnessError::config("margin must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = unit_direction(&mut rng, d);
    let mut rows = Vec::with_capacity(n);
    let mut draws = 0;
    while rows.len() < n {
        if draws == MAX_DRAWS {
            return Err(HarnessError::config(format!(
                "margin {margin} is infeasible: only {} of {n} arms found in {MAX_DRAWS} draws",
                rows.len()
            )));
        }
        draws += 1;
        let z = unit_ball(&mut rng, d);
        let score: f64 = z.iter().zip(&theta).map(|(a, b)| a * b).sum();
        if score.abs() >= margin {
            rows.push(z);
        }
    }
    Ok((ArmSet::new(&rows)?, TrueModel::new(theta, LinkFunction::Logistic)))
}

/// Dataset shaped like precomputed embedding differences: Gaussian features
/// scaled into the unit ball, one logistic label per row drawn once under a
/// random `θ*` of norm `theta_norm`, and rows with label 0 negated so every
/// stored label is 1.
pub fn make_replay_style(d: usize, n: usize, theta_norm: f64, seed: u64) -> Result<(PreferenceData, Vec<f64>)> {
    if d == 0 || n == 0 {
        return Err(HarnessError::config("replay-style data needs d >= 1 and n >= 1"));
    }
    if !(theta_norm > 0.0 && theta_norm.is_finite()) {
        return Err(HarnessError::config("theta norm must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = unit_direction(&mut rng, d).into_iter().map(|x| x * theta_norm).collect();
    let raw: Vec<Vec<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
    let arms = normalize_armset(&raw)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let z = arms.features(i);
            let p = LinkFunction::Logistic.eval(z.iter().zip(&theta).map(|(a, b)| a * b).sum()).unwrap_or(0.5);
            if rng.random_bool(p.clamp(0.0, 1.0)) {
                z.to_vec()
            } else {
                z.iter().map(|x| -x).collect()
            }
        })
        .collect();
    let data = PreferenceData { arms: ArmSet::new(&rows)?, labels: vec![true; n] };
    Ok((data, theta))
}
