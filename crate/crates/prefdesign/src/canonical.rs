//! Labels-to-stop comparison on the canonical instance.

use prefdesign_core::algorithms::{run_sequential, RunConfig, SelectionStrategy};
use prefdesign_core::complexity::canonical_instance;
use prefdesign_core::oracle::SimulatedOracle;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::experiment::{derive_seed, with_pool};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationConfig {
    pub d: usize,
    pub epsilon: f64,
    pub seeds: u64,
    pub first_seed: u64,
    pub delta: f64,
    /// Label cap per run; a run that has not stopped by then is flagged.
    pub budget_cap: u64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig { d: 10, epsilon: 0.1, seeds: 20, first_seed: 0, delta: 0.1, budget_cap: 5_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub strategy: String,
    /// Labels to stop, one per seed.
    pub labels: Vec<u64>,
    pub median: f64,
    pub mean: f64,
    /// Per seed, the share of pulls spent on the small-margin arm.
    pub last_arm_share: Vec<f64>,
    pub all_stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSummary {
    pub ours: MethodStats,
    pub max_width: MethodStats,
    /// Median labels of the max-width selector over those of ours.
    pub median_ratio: f64,
    pub mean_ratio: f64,
    pub budget_exceeded: bool,
}

fn median(v: &[u64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m] as f64
    } else {
        (s[m - 1] as f64 + s[m] as f64) / 2.0
    }
}

fn run_method(cfg: &SeparationConfig, strategy: SelectionStrategy) -> Result<MethodStats> {
    let (arms, model) = canonical_instance(cfg.d, cfg.epsilon)?;
    let seeds: Vec<u64> = (cfg.first_seed..cfg.first_seed + cfg.seeds).collect();
    let runs: Vec<Result<(u64, f64, bool)>> = with_pool(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let run_cfg = RunConfig {
                    delta: cfg.delta,
                    refit_every: Some(1),
                    stop_when_classified: true,
                    selection_seed: derive_seed(seed, 3),
                    ..RunConfig::default()
                };
                let mut oracle = SimulatedOracle::new(&arms, &model, derive_seed(seed, 2))?;
                let out = run_sequential(strategy, &arms, &run_cfg, cfg.budget_cap, &mut oracle)?;
                let total = out.labels();
                let share = out.data.pulls()[cfg.d - 1] as f64 / total as f64;
                Ok((total, share, out.stopped_early))
            })
            .collect()
    })?;
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let labels: Vec<u64> = runs.iter().map(|r| r.0).collect();
    Ok(MethodStats {
        strategy: strategy.name().to_string(),
        median: median(&labels),
        mean: labels.iter().sum::<u64>() as f64 / labels.len() as f64,
        last_arm_share: runs.iter().map(|r| r.1).collect(),
        all_stopped: runs.iter().all(|r| r.2),
        labels,
    })
}

/// Runs greedy remaining-uncertainty selection and the max-width selector,
/// both with the same stopping rule, on `canonical_instance(d, ε)`.
pub fn run_canonical_separation(cfg: &SeparationConfig) -> Result<SeparationSummary> {
    if cfg.seeds == 0 {
        return Err(HarnessError::config("at least one seed is required"));
    }
    let ours = run_method(cfg, SelectionStrategy::OursGreedy)?;
    let max_width = run_method(cfg, SelectionStrategy::Apo)?;
    let budget_exceeded = !(ours.all_stopped && max_width.all_stopped);
    if budget_exceeded {
        log::warn!("a run reached the label cap of {} before stopping", cfg.budget_cap);
    }
    Ok(SeparationSummary {
        median_ratio: max_width.median / ours.median,
        mean_ratio: max_width.mean / ours.mean,
        ours,
        max_width,
        budget_exceeded,
    })
}

impl SeparationSummary {
    /// Plain-text table for the command line.
    pub fn table(&self) -> String {
        let mut s = String::from("method,median_labels,mean_labels,mean_last_arm_share,all_stopped\n");
        for m in [&self.ours, &self.max_width] {
            let share = m.last_arm_share.iter().sum::<f64>() / m.last_arm_share.len() as f64;
            s.push_str(&format!("{},{},{:.1},{:.4},{}\n", m.strategy, m.median, m.mean, share, m.all_stopped));
        }
        s.push_str(&format!("ratio,{:.4},{:.4},,\n", self.median_ratio, self.mean_ratio));
        s
    }
}
