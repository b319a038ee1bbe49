//! Regularized maximum-likelihood fitting and confidence widths.
//!
//! All fitting works on [`ArmStats`], the per-arm pull and positive-label
//! counts, so cost scales with the number of distinct arms rather than the
//! number of labels.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Cholesky, Matrix};
use crate::model::{self, ArmSet, ArmStats, FisherMatrix, LinkFunction};
use crate::{CoreError, Result};

/// Multiplier in front of the confidence-width norm.
pub const WIDTH_CONSTANT: f64 = 2.4;

/// Settings for [`mle_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    pub ridge: f64,
    /// Gradient-norm tolerance per observation. The absolute threshold is
    /// `grad_tol · max(1, t)` for `t` records.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig { ridge: 1e-5, grad_tol: 1e-8, max_iter: 100 }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(CoreError::InvalidParameter("ridge must be finite and nonnegative"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(CoreError::InvalidParameter("grad_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(CoreError::InvalidParameter("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Result of [`mle_fit`]. Non-convergence is reported here, not as an error.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub log_likelihood: f64,
}

fn log_sigmoid(u: f64) -> f64 {
    // log σ(u) = −softplus(−u)
    if u > 0.0 {
        -libm::log1p(libm::exp(-u))
    } else {
        u - libm::log1p(libm::exp(u))
    }
}

/// Per-arm contribution `(value, d/du, d²/du²)` of `o·log ψ(u) + (p−o)·log(1−ψ(u))`.
///
/// For non-logistic links the second entry of the Hessian is the expected
/// (Fisher-scoring) curvature, which keeps the Newton system definite.
fn arm_terms(link: LinkFunction, u: f64, pulls: f64, ones: f64) -> Result<(f64, f64, f64)> {
    let zeros = pulls - ones;
    match link {
        LinkFunction::Logistic => {
            let s = model::sigmoid(u);
            let v = ones * log_sigmoid(u) + zeros * log_sigmoid(-u);
            Ok((v, ones - pulls * s, -pulls * model::sigmoid_derivative(u)))
        }
        _ => {
            let p = link.eval(u)?;
            let dp = link.derivative(u)?;
            let term = |count: f64, prob: f64| if count == 0.0 { 0.0 } else { count * libm::log(prob) };
            let v = term(ones, p) + term(zeros, 1.0 - p);
            if !v.is_finite() {
                return Err(CoreError::NonFinite("log-likelihood"));
            }
            let g = dp * (ones / p - zeros / (1.0 - p));
            let h = -pulls * dp * dp / (p * (1.0 - p));
            Ok((v, g, h))
        }
    }
}

/// Regularized log-likelihood `Σ log-lik − (ridge/2)‖θ‖²`.
pub fn log_likelihood(data: &ArmStats, arms: &ArmSet, theta: &[f64], link: LinkFunction, ridge: f64) -> Result<f64> {
    check_inputs(data, arms, theta)?;
    let mut total = -0.5 * ridge * linalg::dot(theta, theta);
    for (i, p, o) in data.observed() {
        let u = linalg::dot(arms.features(i), theta);
        total += arm_terms(link, u, p as f64, o as f64)?.0;
    }
    Ok(total)
}

/// Gradient of [`log_likelihood`] with respect to `θ`.
pub fn log_likelihood_gradient(
    data: &ArmStats,
    arms: &ArmSet,
    theta: &[f64],
    link: LinkFunction,
    ridge: f64,
) -> Result<Vec<f64>> {
    check_inputs(data, arms, theta)?;
    let mut grad: Vec<f64> = theta.iter().map(|t| -ridge * t).collect();
    for (i, p, o) in data.observed() {
        let z = arms.features(i);
        let (_, g, _) = arm_terms(link, linalg::dot(z, theta), p as f64, o as f64)?;
        for (gk, zk) in grad.iter_mut().zip(z) {
            *gk += g * zk;
        }
    }
    Ok(grad)
}

/// Hessian of [`log_likelihood`] (observed for logistic, expected otherwise).
pub fn log_likelihood_hessian(
    data: &ArmStats,
    arms: &ArmSet,
    theta: &[f64],
    link: LinkFunction,
    ridge: f64,
) -> Result<Matrix> {
    check_inputs(data, arms, theta)?;
    let mut h = Matrix::zeros(arms.dim());
    h.add_diag(-ridge);
    for (i, p, o) in data.observed() {
        let z = arms.features(i);
        let (_, _, c) = arm_terms(link, linalg::dot(z, theta), p as f64, o as f64)?;
        h.add_outer(c, z);
    }
    Ok(h)
}

fn check_inputs(data: &ArmStats, arms: &ArmSet, theta: &[f64]) -> Result<()> {
    if data.n_arms() != arms.len() {
        return Err(CoreError::DimensionMismatch { expected: arms.len(), found: data.n_arms() });
    }
    arms.check_dim(theta)
}

/// Fits `θ̂` from zero. See [`mle_fit_from`].
pub fn mle_fit(data: &ArmStats, arms: &ArmSet, link: LinkFunction, cfg: &MleConfig) -> Result<MleFit> {
    mle_fit_from(data, arms, link, cfg, None)
}

/// Damped Newton ascent on the regularized log-likelihood, optionally warm
/// started. Steps are halved until the Armijo condition (constant `1e-4`)
/// holds.
pub fn mle_fit_from(
    data: &ArmStats,
    arms: &ArmSet,
    link: LinkFunction,
    cfg: &MleConfig,
    init: Option<&[f64]>,
) -> Result<MleFit> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(CoreError::Empty("dataset"));
    }
    let d = arms.dim();
    let mut theta = match init {
        Some(t) => {
            arms.check_dim(t)?;
            t.to_vec()
        }
        None => vec![0.0; d],
    };
    let tol = cfg.grad_tol * (data.total() as f64).max(1.0);
    let mut value = log_likelihood(data, arms, &theta, link, cfg.ridge)?;
    if init.is_some() && !value.is_finite() {
        theta = vec![0.0; d];
        value = log_likelihood(data, arms, &theta, link, cfg.ridge)?;
    }
    let mut grad = log_likelihood_gradient(data, arms, &theta, link, cfg.ridge)?;
    let mut grad_norm = linalg::norm(&grad);
    let mut iterations = 0;
    while grad_norm > tol && iterations < cfg.max_iter {
        iterations += 1;
        let mut neg_h = log_likelihood_hessian(data, arms, &theta, link, cfg.ridge)?;
        neg_h.scale(-1.0);
        let tr = neg_h.trace();
        neg_h.add_diag(model::JITTER_REL * if tr > 0.0 { tr / d as f64 } else { 1.0 });
        let step = Cholesky::new(&neg_h)?.solve(&grad);
        let slope = linalg::dot(&grad, &step);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            if let Ok(v) = log_likelihood(data, arms, &cand, link, cfg.ridge) {
                if v >= value + 1e-4 * t * slope {
                    accepted = Some((cand, v));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        theta = cand;
        value = v;
        grad = log_likelihood_gradient(data, arms, &theta, link, cfg.ridge)?;
        grad_norm = linalg::norm(&grad);
    }
    if !value.is_finite() || theta.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::NonFinite("log-likelihood"));
    }
    Ok(MleFit { theta, converged: grad_norm <= tol, iterations, grad_norm, log_likelihood: value })
}

/// Confidence level and effective sample description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSpec {
    pub delta: f64,
    pub t_eff: usize,
    pub d: usize,
}

impl ConfidenceSpec {
    pub fn new(delta: f64, t_eff: usize, d: usize) -> Result<Self> {
        validate_delta(delta)?;
        if t_eff == 0 {
            return Err(CoreError::InvalidParameter("t_eff must be at least 1"));
        }
        if d == 0 {
            return Err(CoreError::InvalidParameter("d must be at least 1"));
        }
        Ok(ConfidenceSpec { delta, t_eff, d })
    }

    /// `√log(2(2 + t_eff)/δ)`.
    pub fn log_factor(&self) -> f64 {
        libm::sqrt(libm::log(2.0 * (2.0 + self.t_eff as f64) / self.delta))
    }
}

/// Accepts `δ ∈ (0, e⁻¹]`.
pub fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= libm::exp(-1.0) + 1e-15) {
        return Err(CoreError::InvalidParameter("delta must lie in (0, 1/e]"));
    }
    Ok(())
}

/// `γ(d) = 64(d ln 6 + ln((2 + t_eff)/δ))`.
pub fn gamma_d(spec: &ConfidenceSpec) -> f64 {
    gamma_raw(spec.d, spec.t_eff, spec.delta)
}

pub(crate) fn gamma_raw(d: usize, t_eff: usize, delta: f64) -> f64 {
    64.0 * (d as f64 * libm::log(6.0) + libm::log((2.0 + t_eff as f64) / delta))
}

/// Width returned by [`conf_width`] with the advisory ξ flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthReport {
    pub width: f64,
    pub xi_condition: bool,
}

/// Factored `H′(D, θ)` for repeated width queries against one dataset.
#[derive(Debug, Clone)]
pub struct WidthCalculator {
    chol: Cholesky,
    scale: f64,
}

impl WidthCalculator {
    /// Factors `H′` at `θ`. An empty dataset gives the jitter-only matrix,
    /// and `t_eff` is floored at 1 inside the log factor.
    pub fn new(data: &ArmStats, arms: &ArmSet, theta: &[f64], link: LinkFunction, delta: f64) -> Result<Self> {
        let fisher = model::fisher_data_or_prior(data, theta, arms, link)?;
        Self::from_fisher(&fisher, data.t_eff().max(1), delta)
    }

    pub fn from_fisher(fisher: &FisherMatrix, t_eff: usize, delta: f64) -> Result<Self> {
        let spec = ConfidenceSpec::new(delta, t_eff.max(1), fisher.dim())?;
        Ok(WidthCalculator { chol: fisher.factor()?, scale: WIDTH_CONSTANT * spec.log_factor() })
    }

    /// `‖z‖²_{H′⁻¹}`.
    pub fn inv_norm_sq(&self, z: &[f64]) -> f64 {
        self.chol.inv_quad(z)
    }

    /// `D(z) = 2.4 ‖z‖_{H′⁻¹} √log(2(2+t_eff)/δ)`.
    pub fn width(&self, z: &[f64]) -> f64 {
        self.scale * libm::sqrt(self.inv_norm_sq(z))
    }

    pub fn widths(&self, arms: &ArmSet) -> Vec<f64> {
        (0..arms.len()).map(|i| self.width(arms.features(i))).collect()
    }
}

/// Confidence width of `z` given `data`, evaluated at `θ` (pass `θ*` for
/// diagnostics or `θ̂` for plug-in use). `spec.t_eff` is used as given.
pub fn conf_width(
    z: &[f64],
    data: &ArmStats,
    arms: &ArmSet,
    theta: &[f64],
    link: LinkFunction,
    spec: &ConfidenceSpec,
) -> Result<WidthReport> {
    arms.check_dim(z)?;
    let fisher = model::fisher_data(data, theta, arms, link)?;
    let chol = fisher.factor()?;
    let width = WIDTH_CONSTANT * libm::sqrt(chol.inv_quad(z)) * spec.log_factor();
    let xi_condition = xi_squared(&chol, data, arms) <= 1.0 / gamma_d(spec);
    Ok(WidthReport { width, xi_condition })
}

fn xi_squared(chol: &Cholesky, data: &ArmStats, arms: &ArmSet) -> f64 {
    data.observed().map(|(i, _, _)| chol.inv_quad(arms.features(i))).fold(0.0, f64::max)
}

/// `max_s ‖z_s‖²_{H′(D,θ)⁻¹} ≤ 1/γ(d)`.
pub fn check_xi_condition(
    data: &ArmStats,
    arms: &ArmSet,
    theta: &[f64],
    link: LinkFunction,
    spec: &ConfidenceSpec,
) -> Result<bool> {
    let fisher = model::fisher_data(data, theta, arms, link)?;
    Ok(xi_squared(&fisher.factor()?, data, arms) <= 1.0 / gamma_d(spec))
}

/// `(zᵀθ̂ − width, zᵀθ̂ + width)`.
pub fn lcb_ucb(z: &[f64], theta_hat: &[f64], width: f64) -> (f64, f64) {
    debug_assert!(width >= 0.0);
    let s = linalg::dot(z, theta_hat);
    (s - width, s + width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabeledDataset;

    fn e1_arms(d: usize) -> ArmSet {
        let mut z = vec![0.0; d];
        z[0] = 1.0;
        ArmSet::new(&[z]).unwrap()
    }

    #[test]
    fn balanced_labels_give_zero() {
        let arms = e1_arms(2);
        let ds = LabeledDataset::from_records(1, &[(0, true), (0, false)]).unwrap();
        let fit = mle_fit(ds.stats(), &arms, LinkFunction::Logistic, &MleConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.theta[0].abs() < 1e-8);
    }

    #[test]
    fn three_to_one_gives_ln3() {
        let arms = e1_arms(1);
        let mut stats = ArmStats::new(1);
        stats.add(0, 4, 3).unwrap();
        let cfg = MleConfig { ridge: 0.0, ..MleConfig::default() };
        let fit = mle_fit(&stats, &arms, LinkFunction::Logistic, &cfg).unwrap();
        assert!((fit.theta[0] - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn gamma_examples() {
        let s = ConfidenceSpec::new((-1f64).exp(), 1, 1).unwrap();
        assert!((gamma_d(&s) - 248.984).abs() < 1e-3);
        let s2 = ConfidenceSpec::new(0.1, 5, 3).unwrap();
        let s3 = ConfidenceSpec::new(0.05, 5, 3).unwrap();
        assert!((gamma_d(&s3) - gamma_d(&s2) - 64.0 * 2f64.ln()).abs() < 1e-10);
        assert!(ConfidenceSpec::new(0.5, 1, 1).is_err());
        assert!(ConfidenceSpec::new(0.1, 0, 1).is_err());
    }

    #[test]
    fn width_halves_with_four_times_data() {
        let arms = e1_arms(1);
        let spec = ConfidenceSpec::new(0.1, 1, 1).unwrap();
        let mut s = ArmStats::new(1);
        s.add(0, 100, 50).unwrap();
        let w1 = conf_width(&[1.0], &s, &arms, &[0.0], LinkFunction::Logistic, &spec).unwrap();
        let expected = 2.4 * (4.0f64 / 100.0).sqrt() * 60f64.ln().sqrt();
        assert!((w1.width - expected).abs() < 1e-9);
        s.add(0, 300, 150).unwrap();
        let w4 = conf_width(&[1.0], &s, &arms, &[0.0], LinkFunction::Logistic, &spec).unwrap();
        assert!((w4.width * 2.0 - w1.width).abs() < 1e-9);
    }

    #[test]
    fn lcb_ucb_examples() {
        let (l, u) = lcb_ucb(&[1.0], &[-0.1], 0.2);
        assert!((l + 0.3).abs() < 1e-15 && (u - 0.1).abs() < 1e-15);
        assert_eq!(lcb_ucb(&[1.0], &[0.4], 0.0), (0.4, 0.4));
    }
}
