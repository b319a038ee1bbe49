//! Instance-dependent complexity: margins, design-based complexity values,
//! the four-term upper bound on labels, a KL-game lower bound, and the
//! canonical separation instance.

use alloc::vec;
use alloc::vec::Vec;

use crate::algorithms::round_log;
use crate::design::{self, Design, DesignProblem, SolverConfig};
use crate::estimator::{self, ConfidenceSpec};
use crate::linalg::{self, Matrix};
use crate::model::{self, ArmSet, LinkFunction, TrueModel};
use crate::{CoreError, Result};

/// `(Δ, ℓ*)` with `Δ = min |zᵀθ*|` and `ℓ* = ⌈log₂(4/Δ)⌉`.
pub fn margin_and_ellstar(arms: &ArmSet, theta_star: &[f64]) -> Result<(f64, u32)> {
    arms.check_dim(theta_star)?;
    let margin = arms.scores(theta_star).into_iter().map(libm::fabs).fold(f64::INFINITY, f64::min);
    if !(margin > 0.0) {
        return Err(CoreError::ZeroMargin);
    }
    Ok((margin, libm::ceil(libm::log2(4.0 / margin)) as u32))
}

/// `min_λ max_z ‖z‖²_{H(λ,θ*)⁻¹} / (zᵀθ*)²`, with the solver report.
pub fn rho_star_detailed(
    arms: &ArmSet,
    theta_star: &[f64],
    link: LinkFunction,
    solver: &SolverConfig,
) -> Result<(Design, design::SolverReport)> {
    margin_and_ellstar(arms, theta_star)?;
    let weights: Vec<f64> = arms.scores(theta_star).into_iter().map(|s| 1.0 / (s * s)).collect();
    let problem = DesignProblem::new(arms, theta_star, link, (0..arms.len()).collect(), weights)?;
    design::solve_design(&problem, solver)
}

/// `ρ*`, the margin-weighted design value at `θ*`.
pub fn rho_star(arms: &ArmSet, theta_star: &[f64], link: LinkFunction, solver: &SolverConfig) -> Result<f64> {
    Ok(rho_star_detailed(arms, theta_star, link, solver)?.1.value)
}

/// `ρ₀ = 3γ(d) · min_λ max_z ‖z‖²_{H(λ,θ*)⁻¹}`.
pub fn rho_zero(
    arms: &ArmSet,
    theta_star: &[f64],
    delta: f64,
    t_eff: usize,
    link: LinkFunction,
    solver: &SolverConfig,
) -> Result<f64> {
    let spec = ConfidenceSpec::new(delta, t_eff, arms.dim())?;
    let problem = DesignProblem::g_optimal(arms, theta_star, link)?;
    let (_, report) = design::solve_design(&problem, solver)?;
    Ok(3.0 * estimator::gamma_d(&spec) * report.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceComplexity {
    pub rho_star: f64,
    pub rho_zero: f64,
    pub ell_star: u32,
    pub margin: f64,
    /// `log(2 ℓ*² |Z| (2 + |Z|)/δ)`.
    pub log_bar: f64,
    pub n_arms: usize,
    pub d: usize,
}

/// All complexity quantities of an instance, with `t_eff = |Z|` inside `γ(d)`.
pub fn instance_complexity(
    arms: &ArmSet,
    model: &TrueModel,
    delta: f64,
    solver: &SolverConfig,
) -> Result<InstanceComplexity> {
    let (margin, ell_star) = margin_and_ellstar(arms, &model.theta_star)?;
    Ok(InstanceComplexity {
        rho_star: rho_star(arms, &model.theta_star, model.link, solver)?,
        rho_zero: rho_zero(arms, &model.theta_star, delta, arms.len(), model.link, solver)?,
        ell_star,
        margin,
        log_bar: round_log(ell_star as usize, arms.len(), delta),
        n_arms: arms.len(),
        d: arms.dim(),
    })
}

/// The four terms of the label bound, each with multiplier `c = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityBound {
    pub rho_star_term: f64,
    pub rho_zero_term: f64,
    pub warmup_term: f64,
    pub rounding_term: f64,
}

impl ComplexityBound {
    /// Sum of the terms; the true bound is this times an unspecified constant.
    pub fn total(&self) -> f64 {
        self.rho_star_term + self.rho_zero_term + self.warmup_term + self.rounding_term
    }
}

/// `(1+ω)ℓ* L ρ* + (1+ω)ℓ* L ρ₀ + (1+ω)κ₀⁻¹ d γ(d) L + ℓ* r(ω)` with `L = log_bar`.
pub fn complexity_bound(ic: &InstanceComplexity, omega: f64, kappa0: f64, delta: f64) -> Result<ComplexityBound> {
    if !(omega > 0.0) || !(kappa0 > 0.0) {
        return Err(CoreError::InvalidParameter("omega and kappa0 must be positive"));
    }
    let spec = ConfidenceSpec::new(delta, ic.n_arms, ic.d)?;
    let ell = ic.ell_star as f64;
    let a = (1.0 + omega) * ell * ic.log_bar;
    Ok(ComplexityBound {
        rho_star_term: a * ic.rho_star,
        rho_zero_term: a * ic.rho_zero,
        warmup_term: (1.0 + omega) / kappa0 * ic.d as f64 * estimator::gamma_d(&spec) * ic.log_bar,
        rounding_term: ell * design::rounding_requirement(ic.d, omega) as f64,
    })
}

/// `KL(Bern(p) ‖ Bern(q))` with `0·ln 0 = 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(CoreError::Domain("probabilities must lie in [0, 1]"));
    }
    let term = |a: f64, b: f64| -> Result<f64> {
        if a == 0.0 {
            Ok(0.0)
        } else if b == 0.0 {
            Err(CoreError::Domain("divergence is infinite"))
        } else {
            Ok(a * libm::log(a / b))
        }
    };
    Ok((term(p, q)? + term(1.0 - p, 1.0 - q)?).max(0.0))
}

/// Settings for [`lower_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundConfig {
    /// Multiplicative-weights rounds of the outer game.
    pub outer_iters: usize,
    /// Newton iterations of each inner constrained minimization.
    pub inner_iters: usize,
    /// Relative game gap under which the estimate is marked converged.
    pub gap_tol: f64,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        LowerBoundConfig { outer_iters: 200, inner_iters: 50, gap_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundEstimate {
    /// `log(1/(2.4δ))` divided by the upper estimate of the game value.
    pub value: f64,
    /// `log(1/(2.4δ))` divided by the best achieved lower game value.
    pub primal_value: f64,
    /// Lower and upper estimates of `max_λ min_θ Σ λᵢ KLᵢ(θ)`.
    pub game_lower: f64,
    pub game_upper: f64,
    /// `(upper − lower)/upper`.
    pub gap: f64,
    pub converged: bool,
    pub design: Design,
    /// Minimizing `θ` on each arm's flip boundary at `design`.
    pub worst_thetas: Vec<Vec<f64>>,
}

/// Per-arm KL terms `KL(σ(zᵢᵀθ*) ‖ σ(zᵢᵀθ))`.
fn kl_vector(arms: &ArmSet, p_star: &[f64], theta: &[f64]) -> Vec<f64> {
    (0..arms.len())
        .map(|i| {
            let q = model::sigmoid(linalg::dot(arms.features(i), theta));
            bernoulli_kl(p_star[i], q).unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Minimizes `Σ λᵢ KLᵢ(θ)` over the hyperplane `z_jᵀθ = 0` by equality-
/// constrained Newton steps from the projection of `θ*`.
fn inner_min(
    arms: &ArmSet,
    theta_star: &[f64],
    p_star: &[f64],
    lam: &[f64],
    j: usize,
    iters: usize,
) -> Result<(f64, Vec<f64>)> {
    let d = arms.dim();
    let zj = arms.features(j);
    let zz = linalg::dot(zj, zj);
    let shift = linalg::dot(zj, theta_star) / zz;
    let mut theta: Vec<f64> = theta_star.iter().zip(zj).map(|(t, z)| t - shift * z).collect();
    let objective = |th: &[f64]| -> f64 { kl_vector(arms, p_star, th).iter().zip(lam).map(|(k, l)| k * l).sum() };
    let mut value = objective(&theta);
    for _ in 0..iters {
        let mut grad = vec![0.0; d];
        let mut hess = Matrix::zeros(d);
        for (i, &l) in lam.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let z = arms.features(i);
            let u = linalg::dot(z, &theta);
            let g = l * (model::sigmoid(u) - p_star[i]);
            for (gk, zk) in grad.iter_mut().zip(z) {
                *gk += g * zk;
            }
            hess.add_outer(l * model::sigmoid_derivative(u), z);
        }
        // Project the gradient onto the constraint plane for the stopping test.
        let gp = linalg::dot(&grad, zj) / zz;
        let proj_norm = libm::sqrt(grad.iter().zip(zj).map(|(g, z)| (g - gp * z) * (g - gp * z)).sum::<f64>());
        if proj_norm <= 1e-13 {
            break;
        }
        let tr = hess.trace();
        hess.add_diag(1e-12 * if tr > 0.0 { tr / d as f64 } else { 1.0 });
        // KKT system [H z_j; z_jᵀ 0][Δ; ν] = [−g; 0].
        let k = d + 1;
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for r in 0..d {
            for c in 0..d {
                a[r * k + c] = hess.get(r, c);
            }
            a[r * k + d] = zj[r];
            a[d * k + r] = zj[r];
            b[r] = -grad[r];
        }
        let sol = linalg::solve_general(k, a, b)?;
        let step = &sol[..d];
        let slope = linalg::dot(&grad, step);
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(step).map(|(a, s)| a + t * s).collect();
            let v = objective(&cand);
            if v <= value + 1e-4 * t * slope {
                theta = cand;
                value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((value, theta))
}

fn inner_all(arms: &ArmSet, theta_star: &[f64], p_star: &[f64], lam: &[f64], iters: usize) -> Result<(usize, Vec<(f64, Vec<f64>)>)> {
    let sols = (0..arms.len())
        .map(|j| inner_min(arms, theta_star, p_star, lam, j, iters))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0;
    for (j, s) in sols.iter().enumerate() {
        if s.0 < sols[worst].0 {
            worst = j;
        }
    }
    Ok((worst, sols))
}

/// Estimates the label lower bound `log(1/(2.4δ)) / max_λ min_{θ flips an arm} Σ λᵢ KLᵢ(θ)`
/// for the logistic link.
///
/// The `λ`-player runs multiplicative weights against best responses. The
/// average of the best-response KL vectors bounds the game value from
/// above, so `value` never overstates the bound.
pub fn lower_bound(arms: &ArmSet, theta_star: &[f64], delta: f64, cfg: &LowerBoundConfig) -> Result<LowerBoundEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CoreError::InvalidParameter("delta must lie in (0, 1)"));
    }
    if cfg.outer_iters == 0 {
        return Err(CoreError::InvalidParameter("outer_iters must be at least 1"));
    }
    margin_and_ellstar(arms, theta_star)?;
    let n = arms.len();
    let p_star: Vec<f64> = arms.scores(theta_star).into_iter().map(model::sigmoid).collect();
    let log_term = libm::log(1.0 / (2.4 * delta)).max(0.0);

    let mut lam = vec![1.0 / n as f64; n];
    let mut best_lam = lam.clone();
    let mut best_lower = f64::NEG_INFINITY;
    let mut kl_sum = vec![0.0; n];
    let mut scale: f64 = 0.0;
    let eta_base = libm::sqrt(8.0 * libm::log(n.max(2) as f64) / cfg.outer_iters as f64);

    for _ in 0..cfg.outer_iters {
        let (worst, sols) = inner_all(arms, theta_star, &p_star, &lam, cfg.inner_iters)?;
        let value = sols[worst].0;
        if value > best_lower {
            best_lower = value;
            best_lam.copy_from_slice(&lam);
        }
        let k = kl_vector(arms, &p_star, &sols[worst].1);
        for (acc, x) in kl_sum.iter_mut().zip(&k) {
            *acc += x;
        }
        scale = scale.max(k.iter().copied().fold(0.0, f64::max));
        if n == 1 || scale == 0.0 {
            continue;
        }
        let eta = eta_base / scale;
        let mut sum = 0.0;
        for (l, x) in lam.iter_mut().zip(&k) {
            *l *= libm::exp(eta * x);
            sum += *l;
        }
        lam.iter_mut().for_each(|l| *l /= sum);
    }
    let upper = kl_sum.iter().map(|s| s / cfg.outer_iters as f64).fold(0.0, f64::max).max(best_lower);
    let (_, sols) = inner_all(arms, theta_star, &p_star, &best_lam, cfg.inner_iters)?;
    let gap = if upper > 0.0 { (upper - best_lower) / upper } else { 0.0 };
    let div = |g: f64| if log_term == 0.0 { 0.0 } else if g > 0.0 { log_term / g } else { f64::INFINITY };
    Ok(LowerBoundEstimate {
        value: div(upper),
        primal_value: div(best_lower),
        game_lower: best_lower,
        game_upper: upper,
        gap,
        converged: gap <= cfg.gap_tol,
        design: Design::from_weights_unchecked(best_lam),
        worst_thetas: sols.into_iter().map(|s| s.1).collect(),
    })
}

/// Standard-basis arms with `θ* = (1, …, 1, ε)`.
pub fn canonical_instance(d: usize, epsilon: f64) -> Result<(ArmSet, TrueModel)> {
    if d < 2 {
        return Err(CoreError::InvalidParameter("canonical instance needs d >= 2"));
    }
    if !(epsilon > 0.0 && epsilon <= 0.25) {
        return Err(CoreError::InvalidParameter("epsilon must lie in (0, 1/4]"));
    }
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        })
        .collect();
    let mut theta = vec![1.0; d];
    theta[d - 1] = epsilon;
    Ok((ArmSet::new(&rows)?, TrueModel::new(theta, LinkFunction::Logistic)))
}

/// `H(λ,θ*)/3 ⪯ H(λ,θ̂) ⪯ 3H(λ,θ*)`, checked through the generalized
/// eigenvalues of the pencil on the range of `H(λ,θ*)`.
pub fn sandwich_check(
    design: &Design,
    theta_hat: &[f64],
    theta_star: &[f64],
    arms: &ArmSet,
    link: LinkFunction,
) -> Result<bool> {
    let h_hat = model::fisher_design(design, theta_hat, arms, link)?.raw();
    let h_star = model::fisher_design(design, theta_star, arms, link)?.raw();
    let (vals, _) = linalg::generalized_eigen_on_range(&h_hat, &h_star);
    let tol = 1e-10;
    Ok(match (vals.first(), vals.last()) {
        (Some(&lo), Some(&hi)) => lo >= 1.0 / 3.0 - tol && hi <= 3.0 + tol,
        _ => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellstar_examples() {
        let arms = ArmSet::new(&[vec![1.0]]).unwrap();
        assert_eq!(margin_and_ellstar(&arms, &[1.0]).unwrap(), (1.0, 2));
        assert_eq!(margin_and_ellstar(&arms, &[0.25]).unwrap(), (0.25, 4));
        assert_eq!(margin_and_ellstar(&arms, &[0.0]).unwrap_err(), CoreError::ZeroMargin);
    }

    #[test]
    fn kl_values() {
        assert_eq!(bernoulli_kl(0.5, 0.5).unwrap(), 0.0);
        assert!((bernoulli_kl(0.7311, 0.5).unwrap() - 0.1110).abs() < 1e-4);
        assert!(bernoulli_kl(0.3, 0.0).is_err());
        assert_eq!(bernoulli_kl(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_lower_bound() {
        let arms = ArmSet::new(&[vec![1.0]]).unwrap();
        let lb = lower_bound(&arms, &[1.0], 0.01, &LowerBoundConfig::default()).unwrap();
        assert!((lb.value - 33.6).abs() < 0.1, "{}", lb.value);
        let zero = lower_bound(&arms, &[1.0], 1.0 / 2.4, &LowerBoundConfig::default()).unwrap();
        assert_eq!(zero.value, 0.0);
    }
}
