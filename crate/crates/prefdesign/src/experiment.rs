//! Multi-seed, multi-strategy batched experiments.

use std::time::Instant;

use prefdesign_core::algorithms::{run_batched_with, RunConfig, SelectionStrategy};
use prefdesign_core::estimator::MleConfig;
use prefdesign_core::model::{ArmSet, TrueModel};
use prefdesign_core::oracle::{LabelOracle, ReplayOracle, SimulatedOracle};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InstanceSource};
use crate::data::{evaluate_accuracy, read_preferences, split_dataset, split_indices, PreferenceData};
use crate::error::{HarnessError, Result};
use crate::output::{summarize, write_summary, write_trace, RunTrace, SummaryRow, TraceRow};
use crate::synthetic::{make_replay_style, make_synthetic};

/// Independent sub-seed for one purpose within a run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const SPLIT_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;
const SELECTION_STREAM: u64 = 3;

/// Instance shared by every cell.
#[derive(Debug, Clone)]
pub enum Instance {
    Simulated { arms: ArmSet, model: TrueModel },
    Recorded(PreferenceData),
}

impl Instance {
    pub fn from_source(source: &InstanceSource) -> Result<Self> {
        Ok(match source {
            InstanceSource::Synthetic { d, n, margin, seed } => {
                let (arms, model) = make_synthetic(*d, *n, *margin, *seed)?;
                Instance::Simulated { arms, model }
            }
            InstanceSource::Replay { path } => Instance::Recorded(read_preferences(path)?),
            InstanceSource::ReplayStyle { d, n, theta_norm, seed } => {
                Instance::Recorded(make_replay_style(*d, *n, *theta_norm, *seed)?.0)
            }
        })
    }
}

/// Train pool with its oracle, and labelled test arms.
pub struct Cell {
    pub train: ArmSet,
    pub oracle: Box<dyn LabelOracle + Send>,
    pub test: ArmSet,
    pub test_labels: Vec<bool>,
}

/// Splits the instance and builds the oracle for one seed.
pub fn prepare(instance: &Instance, split: f64, seed: u64) -> Result<Cell> {
    let split_seed = derive_seed(seed, SPLIT_STREAM);
    match instance {
        Instance::Simulated { arms, model } => {
            let (tr, te) = split_indices(arms.len(), split, split_seed)?;
            let train = arms.subset(&tr)?;
            let test = arms.subset(&te)?;
            let test_labels = test.scores(&model.theta_star).into_iter().map(|s| s > 0.0).collect();
            let oracle = SimulatedOracle::new(&train, model, derive_seed(seed, ORACLE_STREAM))?;
            Ok(Cell { train, oracle: Box::new(oracle), test, test_labels })
        }
        Instance::Recorded(data) => {
            let s = split_dataset(data, split, split_seed)?;
            let oracle = ReplayOracle::new(s.train.labels.clone());
            Ok(Cell { train: s.train.arms, oracle: Box::new(oracle), test: s.test.arms, test_labels: s.test.labels })
        }
    }
}

/// Run settings for one strategy and seed. Recorded labels are fixed, so
/// those pools are sampled without replacement.
pub fn run_config(cfg: &ExperimentConfig, seed: u64) -> RunConfig {
    let recorded = matches!(cfg.source, InstanceSource::Replay { .. } | InstanceSource::ReplayStyle { .. });
    RunConfig {
        without_replacement: recorded,
        delta: cfg.delta,
        mle: MleConfig { ridge: cfg.ridge, ..MleConfig::default() },
        refit_every: cfg.refit_every,
        selection_seed: derive_seed(seed, SELECTION_STREAM),
        ..RunConfig::default()
    }
}

/// Runs one (seed, strategy) cell and returns a row per batch boundary.
pub fn run_cell(
    cfg: &ExperimentConfig,
    instance: &Instance,
    seed: u64,
    strategy: SelectionStrategy,
) -> Result<Vec<TraceRow>> {
    let mut cell = prepare(instance, cfg.split, seed)?;
    let run_cfg = run_config(cfg, seed);
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut failure = None;
    let mut observe = |p: &prefdesign_core::algorithms::TracePoint| {
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        match evaluate_accuracy(&p.theta, &cell.test, &cell.test_labels) {
            Ok(acc) => rows.push(TraceRow {
                seed,
                strategy: strategy.name().to_string(),
                labels_spent: p.labels_spent,
                test_accuracy: acc,
                active_set_size: p.active_set_size,
                wall_ms,
            }),
            Err(e) => failure = Some(e),
        }
    };
    run_batched_with(strategy, &cell.train, &run_cfg, cfg.batch_size, cfg.budget, cell.oracle.as_mut(), &mut observe)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

#[derive(Debug)]
pub struct CellFailure {
    pub seed: u64,
    pub strategy: String,
    pub error: HarnessError,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub trace: RunTrace,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<CellFailure>,
}

/// Worker count from `PREFDESIGN_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("PREFDESIGN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f` on a pool sized by [`thread_count`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| HarnessError::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Every seed × strategy cell in parallel. A failing cell is logged and
/// reported; the others still run. Rows come back sorted by strategy, seed
/// and labels spent, and are written to the configured paths.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let instance = Instance::from_source(&cfg.source)?;
    let cells: Vec<(u64, SelectionStrategy)> = (cfg.first_seed..cfg.first_seed + cfg.n_seeds)
        .flat_map(|seed| cfg.strategies.iter().map(move |s| (seed, *s)))
        .collect();
    let results: Vec<_> = with_pool(|| {
        cells.par_iter().map(|&(seed, s)| (seed, s, run_cell(cfg, &instance, seed, s))).collect()
    })?;
    let mut trace = RunTrace::default();
    let mut failures = Vec::new();
    for (seed, s, r) in results {
        match r {
            Ok(rows) => trace.rows.extend(rows),
            Err(error) => {
                log::warn!("seed {seed}, strategy {s}: {error}");
                failures.push(CellFailure { seed, strategy: s.name().to_string(), error });
            }
        }
    }
    trace.sort();
    let summary = summarize(&trace);
    if let Some(p) = &cfg.trace_path {
        write_trace(p, &trace)?;
    }
    if let Some(p) = &cfg.summary_path {
        write_summary(p, &summary)?;
    }
    Ok(ExperimentOutput { trace, summary, failures })
}
