//! Query-selection algorithms: warm-up and elimination by experimental design,
//! greedy remaining uncertainty, and the baseline selectors with their
//! sequential and batched run loops.

mod baselines;
mod batched;
mod exp_design;
mod greedy;

pub use baselines::{baseline_step, select_next, strategy_scores, SelectionStrategy, DEFAULT_SELECTIVE_THRESHOLD};
pub use batched::{
    run_batched, run_batched_with, run_greedy, run_sequential, run_sequential_with, top_order, RunConfig, RunOutput,
    TracePoint,
};
pub use exp_design::{
    round_log, round_size, run_exp_design, warmup, warmup_size, ExpDesignConfig, ExpDesignOutput, ExpDesignTrace,
    RoundRecord, WarmupResult,
};
pub use greedy::{all_classified, greedy_step, remaining_uncertainties, remaining_uncertainty, stopping_check};
