//! Warm-up sampling and the elimination-based experimental-design algorithm.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::{self, Design, DesignProblem, SolverConfig};
use crate::estimator::{self, MleConfig};
use crate::linalg;
use crate::model::{ArmSet, ArmStats, LinkFunction};
use crate::oracle::LabelOracle;
use crate::{CoreError, Result};

/// Knobs for [`warmup`] and [`run_exp_design`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpDesignConfig {
    pub delta: f64,
    pub omega: f64,
    /// Lower bound on the link curvature over all arms.
    pub kappa0: f64,
    pub link: LinkFunction,
    pub mle: MleConfig,
    pub solver: SolverConfig,
    /// Hard limit on oracle calls; the run stops and flags the trace instead
    /// of exceeding it.
    pub budget_cap: u64,
    /// Reuse the labels already collected for `Q` instead of re-querying.
    pub reuse_q: bool,
}

impl Default for ExpDesignConfig {
    fn default() -> Self {
        ExpDesignConfig {
            delta: 0.1,
            omega: 1.0,
            kappa0: 0.25,
            link: LinkFunction::Logistic,
            mle: MleConfig::default(),
            solver: SolverConfig::default(),
            budget_cap: 1_000_000,
            reuse_q: false,
        }
    }
}

impl ExpDesignConfig {
    fn validate(&self) -> Result<()> {
        estimator::validate_delta(self.delta)?;
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(CoreError::InvalidParameter("omega must lie in (0, 1]"));
        }
        if !(self.kappa0 > 0.0 && self.kappa0 <= 0.25) {
            return Err(CoreError::InvalidParameter("kappa0 must lie in (0, 0.25]"));
        }
        self.mle.validate()
    }
}

/// `log(2 ℓ² |Z| (2 + |Z|)/δ)`; `ℓ = 1` gives the warm-up log term.
pub fn round_log(ell: usize, n_arms: usize, delta: f64) -> f64 {
    let n = n_arms as f64;
    let l = ell as f64;
    libm::log(2.0 * l * l * n * (2.0 + n) / delta)
}

/// `N₀ = ⌈3(1+ω) κ₀⁻¹ d γ(d) log(2|Z|(2+|Z|)/δ)⌉` with `t_eff = |Z|` in `γ(d)`.
pub fn warmup_size(d: usize, n_arms: usize, delta: f64, omega: f64, kappa0: f64) -> u64 {
    let gamma = estimator::gamma_raw(d, n_arms, delta);
    libm::ceil(3.0 * (1.0 + omega) / kappa0 * d as f64 * gamma * round_log(1, n_arms, delta)) as u64
}

/// `N_ℓ = ⌈3(1+ω) ρ log(2ℓ²|Z|(2+|Z|)/δ)⌉ ∨ r(ω)`.
pub fn round_size(rho: f64, ell: usize, n_arms: usize, d: usize, delta: f64, omega: f64) -> u64 {
    let n = libm::ceil(3.0 * (1.0 + omega) * rho * round_log(ell, n_arms, delta));
    let n = if n.is_finite() && n < u64::MAX as f64 { n as u64 } else { u64::MAX };
    n.max(design::rounding_requirement(d, omega))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmupResult {
    pub theta: Vec<f64>,
    pub labels: u64,
    pub design: Design,
    pub counts: Vec<u64>,
    pub mle_converged: bool,
}

fn pull(oracle: &mut dyn LabelOracle, counts: &[u64], into: &mut ArmStats) -> Result<()> {
    for (arm, &c) in counts.iter().enumerate() {
        if c > 0 {
            let ones = oracle.query_many(arm, c)?;
            into.add(arm, c, ones)?;
        }
    }
    Ok(())
}

/// Curvature-free G-optimal design rounded to `N₀` pulls, followed by an MLE.
pub fn warmup(arms: &ArmSet, cfg: &ExpDesignConfig, oracle: &mut dyn LabelOracle) -> Result<WarmupResult> {
    cfg.validate()?;
    check_oracle(arms, oracle)?;
    let problem = DesignProblem::g_optimal_plain(arms)?;
    let (design, _) = design::solve_design(&problem, &cfg.solver)?;
    let n0 = warmup_size(arms.dim(), arms.len(), cfg.delta, cfg.omega, cfg.kappa0);
    if oracle.calls().saturating_add(n0) > cfg.budget_cap {
        return Err(CoreError::InvalidParameter("budget cap is smaller than the warm-up sample"));
    }
    // Constant curvature at θ = 0, so the rounding check matches the design's own matrix.
    let zero = vec![0.0; arms.dim()];
    let counts = design::round_design(&design, n0, cfg.omega, arms, &zero, LinkFunction::Logistic)?;
    let mut stats = ArmStats::new(arms.len());
    pull(oracle, &counts, &mut stats)?;
    let fit = estimator::mle_fit(&stats, arms, cfg.link, &cfg.mle)?;
    Ok(WarmupResult { theta: fit.theta, labels: n0, design, counts, mle_converged: fit.converged })
}

fn check_oracle(arms: &ArmSet, oracle: &dyn LabelOracle) -> Result<()> {
    if oracle.n_arms() != arms.len() {
        return Err(CoreError::DimensionMismatch { expected: arms.len(), found: oracle.n_arms() });
    }
    Ok(())
}

/// One elimination round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub epsilon: f64,
    pub active_before: usize,
    pub active_after: usize,
    pub rho: f64,
    pub solver_gap: f64,
    pub labels: u64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpDesignTrace {
    pub warmup_labels: u64,
    pub rounds: Vec<RoundRecord>,
    /// Labels from the final re-query of `Q` (0 when `Q` is reused).
    pub final_labels: u64,
    /// `|Q| = Σ N_ℓ`.
    pub q_size: u64,
    pub budget_exceeded: bool,
}

impl ExpDesignTrace {
    /// Warm-up plus the adaptive rounds.
    pub fn adaptive_labels(&self) -> u64 {
        self.warmup_labels + self.rounds.iter().map(|r| r.labels).sum::<u64>()
    }

    /// Every oracle call made by the run.
    pub fn total_labels(&self) -> u64 {
        self.adaptive_labels() + self.final_labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpDesignOutput {
    pub theta: Vec<f64>,
    pub warmup: WarmupResult,
    pub trace: ExpDesignTrace,
}

/// Runs warm-up, then halving-ε elimination rounds until no arm is active,
/// then refits on a fresh non-adaptive pass over `Q`.
///
/// When the budget cap would be crossed the run stops early, returns the
/// latest estimate, and sets `budget_exceeded`.
pub fn run_exp_design(arms: &ArmSet, cfg: &ExpDesignConfig, oracle: &mut dyn LabelOracle) -> Result<ExpDesignOutput> {
    let warm = warmup(arms, cfg, oracle)?;
    let n = arms.len();
    let d = arms.dim();
    let mut theta = warm.theta.clone();
    let mut active: Vec<usize> = (0..n).collect();
    let mut q = ArmStats::new(n);
    let mut q_counts = vec![0u64; n];
    let mut trace = ExpDesignTrace {
        warmup_labels: warm.labels,
        rounds: Vec::new(),
        final_labels: 0,
        q_size: 0,
        budget_exceeded: false,
    };
    let mut ell = 1usize;
    while !active.is_empty() {
        let epsilon = libm::ldexp(1.0, 1 - ell as i32);
        let problem = design::alg2_objective(arms, &active, &theta, cfg.link, epsilon, cfg.delta, n)?;
        let (lam, report) = design::solve_design(&problem, &cfg.solver)?;
        let n_ell = round_size(report.value, ell, n, d, cfg.delta, cfg.omega);
        if oracle.calls().saturating_add(n_ell) > cfg.budget_cap {
            trace.budget_exceeded = true;
            break;
        }
        let counts = design::round_design(&lam, n_ell, cfg.omega, arms, &theta, cfg.link)?;
        let mut round_stats = ArmStats::new(n);
        pull(oracle, &counts, &mut round_stats)?;
        q.merge(&round_stats)?;
        for (acc, c) in q_counts.iter_mut().zip(&counts) {
            *acc += c;
        }
        theta = estimator::mle_fit_from(&round_stats, arms, cfg.link, &cfg.mle, Some(&theta))?.theta;
        let before = active.len();
        active.retain(|&i| libm::fabs(linalg::dot(arms.features(i), &theta)) <= epsilon);
        trace.rounds.push(RoundRecord {
            round: ell,
            epsilon,
            active_before: before,
            active_after: active.len(),
            rho: report.value,
            solver_gap: report.duality_gap,
            labels: n_ell,
            theta: theta.clone(),
        });
        ell += 1;
    }
    trace.q_size = q.total();

    if !cfg.reuse_q && oracle.calls().saturating_add(q.total()) > cfg.budget_cap {
        trace.budget_exceeded = true;
    }
    if !trace.budget_exceeded && q.total() > 0 {
        let data = if cfg.reuse_q {
            q
        } else {
            let mut fresh = ArmStats::new(n);
            pull(oracle, &q_counts, &mut fresh)?;
            trace.final_labels = fresh.total();
            fresh
        };
        theta = estimator::mle_fit_from(&data, arms, cfg.link, &cfg.mle, Some(&theta))?.theta;
    }
    Ok(ExpDesignOutput { theta, warmup: warm, trace })
}
