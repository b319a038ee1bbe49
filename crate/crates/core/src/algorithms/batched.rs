//! Sequential and batched run loops around the selection strategies.
//!
//! Selection randomness comes from its own ChaCha8 stream seeded by
//! [`RunConfig::selection_seed`], separate from the oracle's stream.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baselines::{self, SelectionStrategy};
use super::greedy;
use crate::estimator::{self, MleConfig};
use crate::model::{ArmSet, ArmStats, LinkFunction};
use crate::oracle::LabelOracle;
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub delta: f64,
    pub link: LinkFunction,
    pub mle: MleConfig,
    /// Labels between refits in sequential runs. `None` refits after every
    /// label for budgets up to 2,000 and every 50 labels beyond that.
    pub refit_every: Option<usize>,
    /// Stop as soon as every arm's interval excludes zero.
    pub stop_when_classified: bool,
    pub selection_seed: u64,
    /// Query each arm at most once; the run ends early when the pool is
    /// used up. Meant for recorded labels, where a repeated query returns a
    /// copy of the same row.
    pub without_replacement: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta: 0.1,
            link: LinkFunction::Logistic,
            mle: MleConfig::default(),
            refit_every: None,
            stop_when_classified: false,
            selection_seed: 0,
            without_replacement: false,
        }
    }
}

impl RunConfig {
    pub fn refit_interval(&self, budget: u64) -> usize {
        match self.refit_every {
            Some(k) => k.max(1),
            None if budget <= 2_000 => 1,
            None => 50,
        }
    }

    fn validate(&self) -> Result<()> {
        estimator::validate_delta(self.delta)?;
        self.mle.validate()
    }
}

/// State after a refit.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub labels_spent: u64,
    /// Arms whose interval still contains zero when that is tracked (greedy
    /// or early stopping); the arm count otherwise.
    pub active_set_size: usize,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub theta: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub data: ArmStats,
    pub stopped_early: bool,
}

impl RunOutput {
    pub fn labels(&self) -> u64 {
        self.data.total()
    }
}

struct Runner<'a> {
    strategy: SelectionStrategy,
    arms: &'a ArmSet,
    cfg: &'a RunConfig,
    theta: Vec<f64>,
    data: ArmStats,
    trace: Vec<TracePoint>,
    rng: ChaCha8Rng,
    /// Arms still eligible when sampling without replacement.
    available: Option<Vec<bool>>,
}

impl<'a> Runner<'a> {
    fn new(strategy: SelectionStrategy, arms: &'a ArmSet, cfg: &'a RunConfig, oracle: &dyn LabelOracle) -> Result<Self> {
        cfg.validate()?;
        strategy.validate()?;
        if oracle.n_arms() != arms.len() {
            return Err(CoreError::DimensionMismatch { expected: arms.len(), found: oracle.n_arms() });
        }
        Ok(Runner {
            strategy,
            arms,
            cfg,
            theta: vec![0.0; arms.dim()],
            data: ArmStats::new(arms.len()),
            trace: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.selection_seed),
            available: cfg.without_replacement.then(|| vec![true; arms.len()]),
        })
    }

    fn query(&mut self, arm: usize, oracle: &mut dyn LabelOracle) -> Result<()> {
        let y = oracle.query(arm)?;
        if let Some(mask) = &mut self.available {
            mask[arm] = false;
        }
        self.data.record(arm, y)
    }

    fn exhausted(&self) -> bool {
        self.available.as_ref().is_some_and(|m| !m.iter().any(|a| *a))
    }

    /// Refits, records a trace point, and reports whether every arm is classified.
    fn refit(&mut self, observer: &mut dyn FnMut(&TracePoint)) -> Result<bool> {
        let fit = estimator::mle_fit_from(&self.data, self.arms, self.cfg.link, &self.cfg.mle, Some(&self.theta))?;
        self.theta = fit.theta;
        let tracked = self.strategy == SelectionStrategy::OursGreedy || self.cfg.stop_when_classified;
        let active = if tracked {
            greedy::remaining_uncertainties(self.arms, &self.data, &self.theta, self.cfg.delta, self.cfg.link)?
                .into_iter()
                .filter(|ru| !(*ru < 0.0))
                .count()
        } else {
            self.arms.len()
        };
        let point = TracePoint { labels_spent: self.data.total(), active_set_size: active, theta: self.theta.clone() };
        observer(&point);
        self.trace.push(point);
        Ok(self.cfg.stop_when_classified && active == 0)
    }

    fn finish(self, stopped_early: bool) -> RunOutput {
        RunOutput { theta: self.theta, trace: self.trace, data: self.data, stopped_early }
    }
}

/// One arm per step, refitting on the configured cadence.
pub fn run_sequential(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    cfg: &RunConfig,
    budget: u64,
    oracle: &mut dyn LabelOracle,
) -> Result<RunOutput> {
    run_sequential_with(strategy, arms, cfg, budget, oracle, &mut |_| {})
}

/// [`run_sequential`] with a callback invoked at every trace point.
pub fn run_sequential_with(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    cfg: &RunConfig,
    budget: u64,
    oracle: &mut dyn LabelOracle,
    observer: &mut dyn FnMut(&TracePoint),
) -> Result<RunOutput> {
    if budget == 0 {
        return Err(CoreError::InvalidParameter("budget must be at least 1"));
    }
    let mut run = Runner::new(strategy, arms, cfg, oracle)?;
    let every = cfg.refit_interval(budget);
    let mut since_refit = 0;
    for t in 0..budget {
        let arm = baselines::select_next(
            strategy,
            arms,
            &run.data,
            &run.theta,
            cfg.delta,
            cfg.link,
            run.available.as_deref(),
            &mut run.rng,
        )?;
        run.query(arm, oracle)?;
        since_refit += 1;
        if since_refit == every || t + 1 == budget || run.exhausted() {
            since_refit = 0;
            if run.refit(observer)? {
                return Ok(run.finish(true));
            }
        }
        if run.exhausted() {
            break;
        }
    }
    Ok(run.finish(false))
}

/// Greedy remaining-uncertainty selection until `budget` or, when enabled,
/// until every arm is classified.
pub fn run_greedy(arms: &ArmSet, cfg: &RunConfig, budget: u64, oracle: &mut dyn LabelOracle) -> Result<RunOutput> {
    run_sequential(SelectionStrategy::OursGreedy, arms, cfg, budget, oracle)
}

/// Frozen-score batches: score-based strategies take the top `k` arms by the
/// scores at the batch start (score descending, index ascending); randomized
/// ones make `k` independent draws. One refit per batch; the last batch is
/// truncated to the remaining budget.
pub fn run_batched(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    cfg: &RunConfig,
    batch_size: usize,
    budget: u64,
    oracle: &mut dyn LabelOracle,
) -> Result<RunOutput> {
    run_batched_with(strategy, arms, cfg, batch_size, budget, oracle, &mut |_| {})
}

/// [`run_batched`] with a callback invoked at every batch boundary.
pub fn run_batched_with(
    strategy: SelectionStrategy,
    arms: &ArmSet,
    cfg: &RunConfig,
    batch_size: usize,
    budget: u64,
    oracle: &mut dyn LabelOracle,
    observer: &mut dyn FnMut(&TracePoint),
) -> Result<RunOutput> {
    if batch_size == 0 {
        return Err(CoreError::InvalidParameter("batch size must be at least 1"));
    }
    if budget == 0 {
        return Err(CoreError::InvalidParameter("budget must be at least 1"));
    }
    let mut run = Runner::new(strategy, arms, cfg, oracle)?;
    let mut spent = 0u64;
    while spent < budget && !run.exhausted() {
        let k = (budget - spent).min(batch_size as u64) as usize;
        let picks = select_batch(&mut run, k)?;
        spent += picks.len() as u64;
        for arm in picks {
            run.query(arm, oracle)?;
        }
        if run.refit(observer)? {
            return Ok(run.finish(true));
        }
    }
    Ok(run.finish(false))
}

fn select_batch(run: &mut Runner<'_>, k: usize) -> Result<Vec<usize>> {
    let n = run.arms.len();
    let cfg = run.cfg;
    if run.strategy.is_score_based() {
        let mut scores = baselines::strategy_scores(run.strategy, run.arms, &run.data, &run.theta, cfg.delta, cfg.link)?;
        if let Some(mask) = &run.available {
            baselines::mask_scores(&mut scores, mask);
            let left = mask.iter().filter(|a| **a).count();
            return Ok(top_order(&scores).into_iter().take(k.min(left)).collect());
        }
        let order = top_order(&scores);
        return Ok((0..k).map(|j| order[j % n]).collect());
    }
    let lcbs = match run.strategy {
        SelectionStrategy::Selective { .. } => {
            Some(baselines::lower_bounds(run.arms, &run.data, &run.theta, cfg.delta, cfg.link)?)
        }
        _ => None,
    };
    let Some(mask) = &run.available else {
        return Ok((0..k).map(|_| baselines::draw(run.strategy, n, lcbs.as_deref(), None, &mut run.rng)).collect());
    };
    let mut mask = mask.clone();
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k && mask.iter().any(|a| *a) {
        let arm = baselines::draw(run.strategy, n, lcbs.as_deref(), Some(&mask), &mut run.rng);
        mask[arm] = false;
        picks.push(arm);
    }
    Ok(picks)
}

/// Indices sorted by score descending, then index ascending.
pub fn top_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order
}
