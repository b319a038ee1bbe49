//! Allocations over arms and the weighted min-max design problem
//! `min_λ max_{t ∈ targets} w_t ‖z_t‖²_{A(λ)⁻¹}` with `A(λ) = Σ λ_i c_i z_i z_iᵀ`.
//!
//! The solver alternates multiplicative updates on `λ` and on a distribution
//! `q` over targets. Each iterate yields a convexity lower bound, so the
//! returned relative gap is a certificate rather than an estimate.

use alloc::vec;
use alloc::vec::Vec;

use crate::estimator::{self, WIDTH_CONSTANT};
use crate::linalg::{self, Cholesky, Matrix};
use crate::model::{self, ArmSet, ArmStats, FisherMatrix, LinkFunction};
use crate::{CoreError, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// Probability vector over arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    weights: Vec<f64>,
    support: Vec<usize>,
}

impl Design {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let d = Self::from_weights_unchecked(weights);
        d.validate()?;
        Ok(d)
    }

    /// Skips the simplex check. Meant for tests that exercise validation
    /// downstream.
    #[doc(hidden)]
    pub fn from_weights_unchecked(weights: Vec<f64>) -> Self {
        let support = weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect();
        Design { weights, support }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::Empty("design"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self::from_weights_unchecked(w)
    }

    /// Empirical frequencies of integer counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(CoreError::Empty("counts"));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(CoreError::Empty("design"));
        }
        let mut sum = 0.0;
        for &w in &self.weights {
            if !w.is_finite() || w < 0.0 {
                return Err(CoreError::InvalidSimplex { sum: f64::NAN });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(CoreError::InvalidSimplex { sum });
        }
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Weighted min-max design problem over a borrowed arm set.
#[derive(Debug, Clone)]
pub struct DesignProblem<'a> {
    arms: &'a ArmSet,
    curvature: Vec<f64>,
    targets: Vec<usize>,
    target_weights: Vec<f64>,
}

impl<'a> DesignProblem<'a> {
    /// Curvatures `μ̇(zᵢᵀθ)` from `θ` and `link`; `weights[k]` belongs to `targets[k]`.
    pub fn new(
        arms: &'a ArmSet,
        theta: &[f64],
        link: LinkFunction,
        targets: Vec<usize>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let curvature = link.curvatures(arms, theta)?;
        Self::with_curvature(arms, curvature, targets, weights)
    }

    /// Explicit per-arm curvature vector (use all ones for a plain G design).
    pub fn with_curvature(
        arms: &'a ArmSet,
        curvature: Vec<f64>,
        targets: Vec<usize>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if curvature.len() != arms.len() {
            return Err(CoreError::DimensionMismatch { expected: arms.len(), found: curvature.len() });
        }
        if curvature.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(CoreError::InvalidParameter("curvatures must be finite and nonnegative"));
        }
        if targets.is_empty() {
            return Err(CoreError::Empty("target set"));
        }
        if weights.len() != targets.len() {
            return Err(CoreError::DimensionMismatch { expected: targets.len(), found: weights.len() });
        }
        for &t in &targets {
            arms.check_index(t)?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CoreError::InvalidParameter("target weights must be finite and nonnegative"));
        }
        Ok(DesignProblem { arms, curvature, targets, target_weights: weights })
    }

    /// `max_z ‖z‖²_{H(λ,θ)⁻¹}` over every arm.
    pub fn g_optimal(arms: &'a ArmSet, theta: &[f64], link: LinkFunction) -> Result<Self> {
        let n = arms.len();
        Self::new(arms, theta, link, (0..n).collect(), vec![1.0; n])
    }

    /// `max_z ‖z‖²_{(Σλ zzᵀ)⁻¹}` over every arm, with no curvature.
    pub fn g_optimal_plain(arms: &'a ArmSet) -> Result<Self> {
        let n = arms.len();
        Self::with_curvature(arms, vec![1.0; n], (0..n).collect(), vec![1.0; n])
    }

    pub fn arms(&self) -> &ArmSet {
        self.arms
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_weights(&self) -> &[f64] {
        &self.target_weights
    }

    /// `A(λ) = Σ λ_i c_i z_i z_iᵀ` with jitter.
    pub fn information(&self, weights: &[f64]) -> FisherMatrix {
        let w: Vec<f64> = weights.iter().zip(&self.curvature).map(|(l, c)| l * c).collect();
        FisherMatrix::from_raw(model::weighted_information(self.arms, &w))
    }

    fn target_values(&self, chol: &Cholesky) -> Vec<f64> {
        self.targets
            .iter()
            .zip(&self.target_weights)
            .map(|(&t, &w)| if w == 0.0 { 0.0 } else { w * chol.inv_quad(self.arms.features(t)) })
            .collect()
    }

    /// Errors with [`CoreError::Infeasible`] when some weighted target has a
    /// component outside the span of the arms with positive curvature.
    fn check_feasible(&self) -> Result<()> {
        let w: Vec<f64> = self.curvature.iter().map(|c| if *c > 0.0 { 1.0 } else { 0.0 }).collect();
        let a = model::weighted_information(self.arms, &w);
        let (vals, vecs) = linalg::sym_eigen(&a);
        let top = vals.last().copied().unwrap_or(0.0);
        let d = a.dim();
        for (k, &lam) in vals.iter().enumerate() {
            if lam > 1e-10 * top.max(f64::MIN_POSITIVE) {
                continue;
            }
            let v: Vec<f64> = (0..d).map(|r| vecs.get(r, k)).collect();
            for (&t, &wt) in self.targets.iter().zip(&self.target_weights) {
                if wt == 0.0 {
                    continue;
                }
                let z = self.arms.features(t);
                let p = linalg::dot(&v, z);
                if p * p > 1e-12 * linalg::dot(z, z).max(f64::MIN_POSITIVE) {
                    return Err(CoreError::Infeasible);
                }
            }
        }
        Ok(())
    }
}

/// Stopping rule for [`solve_design`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative gap `(value − lower)/value` at which to stop.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the incumbent value after every iteration in the report.
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-3, max_iter: 10_000, record_history: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    /// Objective at the returned design.
    pub value: f64,
    /// Certified lower bound on the optimum.
    pub lower_bound: f64,
    /// `(value − lower_bound)/value`, clamped at 0.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Incumbent values per iteration, nonincreasing, when requested.
    pub history: Vec<f64>,
}

/// Minimizes the weighted min-max objective over the simplex.
///
/// Deterministic given its inputs. On iteration exhaustion the best design
/// found is returned with `converged = false`.
pub fn solve_design(problem: &DesignProblem<'_>, cfg: &SolverConfig) -> Result<(Design, SolverReport)> {
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(CoreError::InvalidParameter("solver tol and max_iter must be positive"));
    }
    problem.check_feasible()?;
    let arms = problem.arms;
    let n = arms.len();
    let m = problem.targets.len();
    let active: Vec<usize> = (0..n).filter(|&i| problem.curvature[i] > 0.0 && linalg::norm(arms.features(i)) > 0.0).collect();
    if active.is_empty() {
        return Err(CoreError::Infeasible);
    }

    let mut lam = vec![0.0; n];
    for &i in &active {
        lam[i] = 1.0 / active.len() as f64;
    }
    let mut q = vec![1.0 / m as f64; m];

    let mut best_lam = lam.clone();
    let mut best_g = f64::INFINITY;
    let mut best_lb = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut u = vec![vec![0.0; arms.dim()]; m];

    loop {
        let chol = problem.information(&lam).factor()?;
        for (k, &t) in problem.targets.iter().enumerate() {
            u[k] = chol.solve(arms.features(t));
        }
        let f: Vec<f64> = (0..m)
            .map(|k| problem.target_weights[k] * linalg::dot(&u[k], arms.features(problem.targets[k])))
            .collect();
        let g = f.iter().copied().fold(0.0, f64::max);
        if g < best_g {
            best_g = g;
            best_lam.copy_from_slice(&lam);
        }
        if cfg.record_history {
            history.push(best_g);
        }
        if g == 0.0 {
            best_lb = 0.0;
            converged = true;
            break;
        }

        let mut s = vec![0.0; n];
        let mut s_max: f64 = 0.0;
        for &i in &active {
            let z = arms.features(i);
            let mut acc = 0.0;
            for k in 0..m {
                let p = linalg::dot(&u[k], z);
                acc += q[k] * problem.target_weights[k] * p * p;
            }
            s[i] = problem.curvature[i] * acc;
            s_max = s_max.max(s[i]);
        }
        let qf: f64 = q.iter().zip(&f).map(|(a, b)| a * b).sum();
        best_lb = best_lb.max(2.0 * qf - s_max);
        if (best_g - best_lb) / best_g <= cfg.tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let mut qsum = 0.0;
        for k in 0..m {
            q[k] *= f[k] / g;
            qsum += q[k];
        }
        q.iter_mut().for_each(|x| *x /= qsum);
        let mut lsum = 0.0;
        for &i in &active {
            lam[i] *= libm::sqrt(s[i]);
            lsum += lam[i];
        }
        if !(lsum > 0.0) {
            return Err(CoreError::NonFinite("design iterate"));
        }
        active.iter().for_each(|&i| lam[i] /= lsum);
    }

    let design = prune(&best_lam);
    let value = objective_value(&design, problem)?.value;
    let lower_bound = best_lb.max(0.0).min(value);
    let duality_gap = if value > 0.0 { ((value - lower_bound) / value).max(0.0) } else { 0.0 };
    Ok((design, SolverReport { value, lower_bound, duality_gap, iterations, converged, history }))
}

fn prune(lam: &[f64]) -> Design {
    let mut w: Vec<f64> = lam.iter().map(|&x| if x < 1e-9 { 0.0 } else { x }).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Design::from_weights_unchecked(w)
}

/// Objective value together with a rank-deficiency flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    /// The design matrix without jitter was not positive definite, so the
    /// value is driven by the jitter ridge.
    pub singular: bool,
}

/// `max_t w_t ‖z_t‖²_{A(λ)⁻¹}` evaluated directly.
pub fn objective_value(design: &Design, problem: &DesignProblem<'_>) -> Result<ObjectiveValue> {
    if design.len() != problem.arms.len() {
        return Err(CoreError::DimensionMismatch { expected: problem.arms.len(), found: design.len() });
    }
    design.validate()?;
    let info = problem.information(design.weights());
    let singular = Cholesky::new(&info.raw()).is_err();
    let value = problem.target_values(&info.factor()?).into_iter().fold(0.0, f64::max);
    Ok(ObjectiveValue { value, singular })
}

/// Encodes `f₁ ∨ f₂` of one elimination round: every arm carries weight
/// `γ(d)` and active arms carry `max(γ(d), 2.4²/ε²)`.
pub fn alg2_objective<'a>(
    arms: &'a ArmSet,
    active: &[usize],
    theta_hat: &[f64],
    link: LinkFunction,
    epsilon: f64,
    delta: f64,
    t_eff: usize,
) -> Result<DesignProblem<'a>> {
    if active.is_empty() {
        return Err(CoreError::Empty("active set"));
    }
    if !(epsilon > 0.0) {
        return Err(CoreError::InvalidParameter("epsilon must be positive"));
    }
    let spec = estimator::ConfidenceSpec::new(delta, t_eff, arms.dim())?;
    let gamma = estimator::gamma_d(&spec);
    let boosted = gamma.max(WIDTH_CONSTANT * WIDTH_CONSTANT / (epsilon * epsilon));
    let n = arms.len();
    let mut weights = vec![gamma; n];
    for &a in active {
        arms.check_index(a)?;
        weights[a] = boosted;
    }
    DesignProblem::new(arms, theta_hat, link, (0..n).collect(), weights)
}

/// Arm maximizing `det(H′ + μ̇ zzᵀ)`, i.e. `μ̇(zᵀθ̂)·zᵀH′⁻¹z`. Lowest index on ties.
pub fn d_optimal_pick(history: &ArmStats, arms: &ArmSet, theta_hat: &[f64], link: LinkFunction) -> Result<usize> {
    let fisher = model::fisher_data_or_prior(history, theta_hat, arms, link)?;
    let chol = fisher.factor()?;
    let curv = link.curvatures(arms, theta_hat)?;
    let scores: Vec<f64> = (0..arms.len()).map(|i| curv[i] * chol.inv_quad(arms.features(i))).collect();
    Ok(argmax_lowest(&scores))
}

/// Index of the largest value, preferring the lowest index on ties.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `r(ω) = ⌈(d(d+1) + 2)/ω⌉`.
pub fn rounding_requirement(d: usize, omega: f64) -> u64 {
    libm::ceil((d * (d + 1) + 2) as f64 / omega) as u64
}

/// Largest-remainder apportionment of `n·λ`; remainders tie toward lower indices.
pub fn apportion(design: &Design, n: u64) -> Vec<u64> {
    let w = design.weights();
    let mut counts: Vec<u64> = Vec::with_capacity(w.len());
    let mut rems: Vec<(f64, usize)> = Vec::with_capacity(w.len());
    let mut assigned = 0u64;
    for (i, &x) in w.iter().enumerate() {
        let target = x * n as f64;
        let fl = libm::floor(target);
        counts.push(fl as u64);
        assigned += fl as u64;
        rems.push((target - fl, i));
    }
    // Stable ordering: larger remainder first, then lower index.
    rems.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut left = n.saturating_sub(assigned);
    let mut k = 0;
    while left > 0 {
        counts[rems[k % rems.len()].1] += 1;
        left -= 1;
        k += 1;
    }
    while assigned > n {
        // Only reachable through floating error on huge n.
        let i = argmax_lowest(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        counts[i] -= 1;
        assigned -= 1;
    }
    counts
}

/// Smallest generalized eigenvalue of `(Σ cᵢ μ̇ᵢ zᵢzᵢᵀ)/n` against `H(λ)` on
/// the range of `H(λ)`, with its eigenvector.
fn rounding_ratio(arms: &ArmSet, curv: &[f64], counts: &[u64], n: u64, h: &Matrix) -> (f64, Vec<f64>) {
    let w: Vec<f64> = counts.iter().zip(curv).map(|(&c, &m)| c as f64 * m / n as f64).collect();
    let m = model::weighted_information(arms, &w);
    let (vals, vecs) = linalg::generalized_eigen_on_range(&m, h);
    match vals.first() {
        Some(&v) => (v, vecs[0].clone()),
        None => (f64::INFINITY, vec![0.0; arms.dim()]),
    }
}

/// Minimum generalized eigenvalue of `(Σ μ̇ z_s z_sᵀ)/n` relative to `H(λ, θ)`.
pub fn rounding_margin(design: &Design, counts: &[u64], arms: &ArmSet, theta: &[f64], link: LinkFunction) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(CoreError::Empty("counts"));
    }
    let curv = link.curvatures(arms, theta)?;
    let hw: Vec<f64> = design.weights().iter().zip(&curv).map(|(l, c)| l * c).collect();
    let h = model::weighted_information(arms, &hw);
    Ok(rounding_ratio(arms, &curv, counts, n, &h).0)
}

/// Converts `λ` into exactly `n` pulls and verifies
/// `Σ μ̇ z_s z_sᵀ ⪰ n/(1+ω)·H(λ, θ)` at the probe `θ`, repairing the
/// allocation one pull at a time when the check fails.
pub fn round_design(
    design: &Design,
    n: u64,
    omega: f64,
    arms: &ArmSet,
    theta: &[f64],
    link: LinkFunction,
) -> Result<Vec<u64>> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(CoreError::InvalidParameter("omega must lie in (0, 1]"));
    }
    if design.len() != arms.len() {
        return Err(CoreError::DimensionMismatch { expected: arms.len(), found: design.len() });
    }
    design.validate()?;
    let required = rounding_requirement(arms.dim(), omega);
    if n < required {
        return Err(CoreError::RoundingPrecondition { requested: n, required });
    }
    let curv = link.curvatures(arms, theta)?;
    let hw: Vec<f64> = design.weights().iter().zip(&curv).map(|(l, c)| l * c).collect();
    let h = model::weighted_information(arms, &hw);
    let target = 1.0 / (1.0 + omega) - 1e-12;

    let mut counts = apportion(design, n);
    let (mut nu, mut v) = rounding_ratio(arms, &curv, &counts, n, &h);
    let mut steps = 0u64;
    while nu < target {
        if steps >= n {
            return Err(CoreError::RoundingFailed);
        }
        let score: Vec<f64> = (0..arms.len())
            .map(|i| {
                let p = linalg::dot(&v, arms.features(i));
                curv[i] * p * p
            })
            .collect();
        let recipient = argmax_lowest(&score);
        let mut donors: Vec<usize> = (0..arms.len()).filter(|&j| j != recipient && counts[j] > 0).collect();
        donors.sort_by(|&a, &b| score[a].partial_cmp(&score[b]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut moved = false;
        for j in donors {
            counts[j] -= 1;
            counts[recipient] += 1;
            let (nu2, v2) = rounding_ratio(arms, &curv, &counts, n, &h);
            if nu2 > nu {
                nu = nu2;
                v = v2;
                moved = true;
                break;
            }
            counts[j] += 1;
            counts[recipient] -= 1;
        }
        if !moved {
            return Err(CoreError::RoundingFailed);
        }
        steps += 1;
    }
    Ok(counts)
}
