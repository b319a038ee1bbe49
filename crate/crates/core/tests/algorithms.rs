mod common;

use common::*;
use prefdesign_core::algorithms::{
    baseline_step, greedy_step, remaining_uncertainties, remaining_uncertainty, run_batched, run_exp_design,
    run_greedy, run_sequential, stopping_check, top_order, warmup, warmup_size, ExpDesignConfig, RunConfig,
    SelectionStrategy,
};
use prefdesign_core::complexity::canonical_instance;
use prefdesign_core::estimator::{gamma_d, ConfidenceSpec};
use prefdesign_core::model::{ArmSet, ArmStats, LinkFunction, TrueModel};
use prefdesign_core::oracle::{LabelOracle, ReplayOracle, SimulatedOracle};
use prefdesign_core::Result;
use proptest::prelude::*;
use rand::Rng;

const LOGISTIC: LinkFunction = LinkFunction::Logistic;

/// Oracle wrapper that remembers the order of queried arms.
struct Recording<O> {
    inner: O,
    log: Vec<usize>,
}

impl<O: LabelOracle> LabelOracle for Recording<O> {
    fn query(&mut self, arm: usize) -> Result<bool> {
        self.log.push(arm);
        self.inner.query(arm)
    }
    fn calls(&self) -> u64 {
        self.inner.calls()
    }
    fn n_arms(&self) -> usize {
        self.inner.n_arms()
    }
}

fn all_strategies() -> Vec<SelectionStrategy> {
    vec![
        SelectionStrategy::OursGreedy,
        SelectionStrategy::Random,
        SelectionStrategy::Uncertainty,
        SelectionStrategy::Selective { threshold: 0.1 },
        SelectionStrategy::Apo,
        SelectionStrategy::DOptimal,
    ]
}

fn small_instance(seed: u64, n: usize, d: usize) -> (ArmSet, TrueModel) {
    let mut r = rng(seed);
    let arms = random_arms(&mut r, n, d);
    let theta = uniform_vec(&mut r, d, -3.0, 3.0);
    (arms, TrueModel::new(theta, LOGISTIC))
}

#[test]
fn figure_two_argmax_is_arm_four() {
    let ru: Vec<f64> =
        [(0.65, 0.3), (-0.1, 0.2), (-0.25, 0.15), (0.1, 0.3)].iter().map(|&(s, w)| remaining_uncertainty(&[1.0], &[s], w)).collect();
    assert_eq!(top_order(&ru)[0], 3);
    assert!(stopping_check(&[1.0], &[0.65], 0.3));
}

#[test]
fn greedy_ties_and_negative_scores() {
    let arms = ArmSet::new(&[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.1, 0.0]]).unwrap();
    assert_eq!(greedy_step(&arms, &ArmStats::new(3), &[0.0, 0.0], 0.1, LOGISTIC).unwrap(), 0);
    // With plenty of data every RU is negative; the argmax is still returned.
    let b = basis(2);
    let mut s = ArmStats::new(2);
    s.add(0, 100_000, 73_106).unwrap();
    s.add(1, 100_000, 26_894).unwrap();
    let theta = [1.0, -1.0];
    let ru = remaining_uncertainties(&b, &s, &theta, 0.1, LOGISTIC).unwrap();
    assert!(ru.iter().all(|x| *x < 0.0));
    let pick = greedy_step(&b, &s, &theta, 0.1, LOGISTIC).unwrap();
    assert_eq!(pick, top_order(&ru)[0]);
}

#[test]
fn greedy_budget_one_and_trace_steps() {
    let (arms, model) = small_instance(41, 6, 3);
    let cfg = RunConfig::default();
    let mut o = SimulatedOracle::new(&arms, &model, 1).unwrap();
    let out = run_greedy(&arms, &cfg, 1, &mut o).unwrap();
    assert_eq!(o.calls(), 1);
    assert_eq!(out.labels(), 1);
    let mut o = SimulatedOracle::new(&arms, &model, 1).unwrap();
    let out = run_greedy(&arms, &cfg, 40, &mut o).unwrap();
    let spent: Vec<u64> = out.trace.iter().map(|p| p.labels_spent).collect();
    assert_eq!(spent, (1..=40).collect::<Vec<u64>>());
}

#[test]
fn greedy_spends_more_on_the_small_margin_arm() {
    let (arms, model) = canonical_instance(2, 0.25).unwrap();
    let cfg = RunConfig { stop_when_classified: true, refit_every: Some(1), ..RunConfig::default() };
    for seed in 0..3 {
        let mut o = SimulatedOracle::new(&arms, &model, seed).unwrap();
        let out = run_greedy(&arms, &cfg, 200_000, &mut o).unwrap();
        assert!(out.stopped_early);
        assert!(out.data.pulls()[1] > out.data.pulls()[0], "{:?}", out.data.pulls());
    }
}

#[test]
fn baseline_examples() {
    let b = basis(2);
    let mut r = rng(5);
    let empty = ArmStats::new(2);
    let step = |s: SelectionStrategy, data: &ArmStats, theta: &[f64], r: &mut rand_chacha::ChaCha8Rng| {
        baseline_step(s, &b, data, theta, 0.1, LOGISTIC, r).unwrap()
    };
    assert_eq!(step(SelectionStrategy::Uncertainty, &empty, &[0.0, 0.0], &mut r), 0);
    let mut hist = ArmStats::new(2);
    hist.add(0, 20, 10).unwrap();
    assert_eq!(step(SelectionStrategy::Apo, &hist, &[0.0, 0.0], &mut r), 1);
    assert_eq!(step(SelectionStrategy::DOptimal, &hist, &[0.0, 0.0], &mut r), 1);

    // Every LCB is far above the threshold: selective falls back to a uniform draw.
    let mut big = ArmStats::new(2);
    big.add(0, 1_000_000, 880_797).unwrap();
    big.add(1, 1_000_000, 880_797).unwrap();
    let theta = [2.0, 2.0];
    let sel = SelectionStrategy::Selective { threshold: 0.1 };
    let mut seen = [0usize; 2];
    let mut r1 = rng(9);
    let mut r2 = rng(9);
    for _ in 0..200 {
        let a = step(sel, &big, &theta, &mut r1);
        assert_eq!(a, step(sel, &big, &theta, &mut r2));
        seen[a] += 1;
    }
    assert!(seen[0] > 50 && seen[1] > 50);
}

#[test]
fn batches_truncate_at_budget() {
    let (arms, model) = small_instance(42, 30, 3);
    let mut o = SimulatedOracle::new(&arms, &model, 3).unwrap();
    let out = run_batched(SelectionStrategy::Random, &arms, &RunConfig::default(), 50, 120, &mut o).unwrap();
    let spent: Vec<u64> = out.trace.iter().map(|p| p.labels_spent).collect();
    assert_eq!(spent, vec![50, 100, 120]);
    assert_eq!(o.calls(), 120);
}

#[test]
fn greedy_batch_is_top_k_of_frozen_scores() {
    let (arms, model) = small_instance(43, 120, 4);
    let cfg = RunConfig::default();
    let mut o = Recording { inner: SimulatedOracle::new(&arms, &model, 4).unwrap(), log: Vec::new() };
    let out = run_batched(SelectionStrategy::OursGreedy, &arms, &cfg, 50, 100, &mut o).unwrap();
    // State at the start of the second batch: data from batch 1 and the first refit.
    let mut data = ArmStats::new(arms.len());
    let mut replay = SimulatedOracle::new(&arms, &model, 4).unwrap();
    for &a in &o.log[..50] {
        data.record(a, replay.query(a).unwrap()).unwrap();
    }
    let theta = &out.trace[0].theta;
    let ru = remaining_uncertainties(&arms, &data, theta, cfg.delta, LOGISTIC).unwrap();
    let mut idx: Vec<usize> = (0..arms.len()).collect();
    idx.sort_by(|&a, &b| ru[b].partial_cmp(&ru[a]).unwrap().then(a.cmp(&b)));
    let mut want = idx[..50].to_vec();
    let mut got = o.log[50..].to_vec();
    want.sort_unstable();
    got.sort_unstable();
    assert_eq!(got, want);
}

#[test]
fn batch_of_one_equals_sequential() {
    let (arms, model) = small_instance(44, 15, 3);
    let cfg = RunConfig { refit_every: Some(1), selection_seed: 77, ..RunConfig::default() };
    for s in all_strategies() {
        let mut o1 = SimulatedOracle::new(&arms, &model, 8).unwrap();
        let mut o2 = SimulatedOracle::new(&arms, &model, 8).unwrap();
        let a = run_sequential(s, &arms, &cfg, 60, &mut o1).unwrap();
        let b = run_batched(s, &arms, &cfg, 1, 60, &mut o2).unwrap();
        assert_eq!(a, b, "strategy {s}");
    }
}

#[test]
fn runs_are_deterministic() {
    let (arms, model) = small_instance(45, 20, 3);
    let cfg = RunConfig { selection_seed: 3, ..RunConfig::default() };
    for s in all_strategies() {
        let run = || {
            let mut o = SimulatedOracle::new(&arms, &model, 11).unwrap();
            run_batched(s, &arms, &cfg, 7, 50, &mut o).unwrap()
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn without_replacement_queries_distinct_arms_and_stops_when_exhausted() {
    let (arms, model) = small_instance(47, 12, 3);
    let cfg = RunConfig { without_replacement: true, selection_seed: 9, ..RunConfig::default() };
    for s in all_strategies() {
        for batch in [1, 5, 50] {
            let mut o = Recording { inner: SimulatedOracle::new(&arms, &model, 13).unwrap(), log: Vec::new() };
            let out = run_batched(s, &arms, &cfg, batch, 40, &mut o).unwrap();
            let mut seen = o.log.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), o.log.len(), "strategy {s} batch {batch} repeated an arm");
            assert_eq!(out.labels(), 12, "strategy {s} batch {batch}");
        }
    }
}

#[test]
fn without_replacement_batch_of_one_equals_sequential() {
    let (arms, model) = small_instance(48, 15, 3);
    let cfg = RunConfig { without_replacement: true, refit_every: Some(1), selection_seed: 21, ..RunConfig::default() };
    for s in all_strategies() {
        let mut o1 = SimulatedOracle::new(&arms, &model, 8).unwrap();
        let mut o2 = SimulatedOracle::new(&arms, &model, 8).unwrap();
        let a = run_sequential(s, &arms, &cfg, 10, &mut o1).unwrap();
        let b = run_batched(s, &arms, &cfg, 1, 10, &mut o2).unwrap();
        assert_eq!(a, b, "strategy {s}");
    }
}

#[test]
fn replay_oracle_run() {
    let (arms, model) = small_instance(46, 10, 2);
    let labels: Vec<bool> = arms.scores(&model.theta_star).iter().map(|s| *s > 0.0).collect();
    let mut o = ReplayOracle::new(labels);
    let out = run_batched(SelectionStrategy::Uncertainty, &arms, &RunConfig::default(), 5, 20, &mut o).unwrap();
    assert_eq!(out.labels(), 20);
}

#[test]
fn warmup_size_formula() {
    let d = 2;
    let n = 2;
    let delta = 0.1;
    let spec = ConfidenceSpec::new(delta, n, d).unwrap();
    let g = gamma_d(&spec);
    assert!((g - 64.0 * (2.0 * 6f64.ln() + (4.0f64 / 0.1).ln())).abs() < 1e-9);
    let want = (3.0 * 2.0 / 0.25 * d as f64 * g * (2.0f64 * 2.0 * 4.0 / 0.1).ln()).ceil() as u64;
    assert_eq!(warmup_size(d, n, delta, 1.0, 0.25), want);
    let half = warmup_size(d, n, delta, 1.0, 0.125);
    assert!(half == 2 * want || half + 1 == 2 * want);
}

fn well_separated() -> (ArmSet, TrueModel) {
    // Every margin equals 1.
    (basis(2), TrueModel::new(vec![1.0, -1.0], LOGISTIC))
}

#[test]
fn exp_design_accounting_and_schedule() {
    let (arms, model) = well_separated();
    let cfg = ExpDesignConfig {
        kappa0: model.kappa0(&arms).unwrap(),
        budget_cap: 100_000_000,
        ..ExpDesignConfig::default()
    };
    for seed in 0..3 {
        let mut o = SimulatedOracle::new(&arms, &model, seed).unwrap();
        let out = run_exp_design(&arms, &cfg, &mut o).unwrap();
        let t = &out.trace;
        assert!(!t.budget_exceeded);
        assert!(t.rounds.len() <= 3, "{} rounds", t.rounds.len());
        for (k, r) in t.rounds.iter().enumerate() {
            assert_eq!(r.epsilon, 2f64.powi(-(k as i32)));
            assert!(r.active_after <= r.active_before);
            if k > 0 {
                assert_eq!(r.active_before, t.rounds[k - 1].active_after);
            }
        }
        let sum_n: u64 = t.rounds.iter().map(|r| r.labels).sum();
        assert_eq!(t.q_size, sum_n);
        assert_eq!(t.final_labels, sum_n);
        assert_eq!(t.total_labels(), t.warmup_labels + 2 * sum_n);
        assert_eq!(o.calls(), t.total_labels());
        let signs_ok = arms.scores(&out.theta).iter().zip(arms.scores(&model.theta_star)).all(|(a, b)| a * b > 0.0);
        assert!(signs_ok);
    }
}

#[test]
fn exp_design_budget_cap_flags() {
    let (arms, model) = well_separated();
    let n0 = warmup_size(2, 2, 0.1, 1.0, model.kappa0(&arms).unwrap());
    let cfg = ExpDesignConfig { kappa0: model.kappa0(&arms).unwrap(), budget_cap: n0 + 10, ..ExpDesignConfig::default() };
    let mut o = SimulatedOracle::new(&arms, &model, 0).unwrap();
    let out = run_exp_design(&arms, &cfg, &mut o).unwrap();
    assert!(out.trace.budget_exceeded);
    assert!(o.calls() <= cfg.budget_cap);
}

#[test]
fn exp_design_reuse_q_skips_requery() {
    let (arms, model) = well_separated();
    let cfg = ExpDesignConfig {
        kappa0: model.kappa0(&arms).unwrap(),
        budget_cap: 100_000_000,
        reuse_q: true,
        ..ExpDesignConfig::default()
    };
    let mut o = SimulatedOracle::new(&arms, &model, 1).unwrap();
    let out = run_exp_design(&arms, &cfg, &mut o).unwrap();
    assert_eq!(out.trace.final_labels, 0);
    assert_eq!(o.calls(), out.trace.adaptive_labels());
}

#[test]
fn warmup_is_usually_sign_correct() {
    let mut correct = 0;
    let runs = 20;
    for seed in 0..runs {
        let mut r = rng(1000 + seed);
        // Unit θ*, margins 0.5 and 0.34.
        let theta = [0.6, 0.8];
        let arms = ArmSet::new(&[vec![0.3, 0.4], vec![0.7, -0.1]]).unwrap();
        let model = TrueModel::new(theta.to_vec(), LOGISTIC);
        let cfg = ExpDesignConfig { kappa0: model.kappa0(&arms).unwrap(), budget_cap: u64::MAX, ..ExpDesignConfig::default() };
        let mut o = SimulatedOracle::new(&arms, &model, r.random()).unwrap();
        let w = warmup(&arms, &cfg, &mut o).unwrap();
        let ok = arms.scores(&w.theta).iter().zip(arms.scores(&theta)).all(|(a, b)| a * b > 0.0);
        correct += ok as usize;
    }
    assert!(correct as f64 >= 0.9 * runs as f64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn remaining_uncertainty_identity(s in -5.0f64..5.0, w in 0.0f64..5.0) {
        let ru = remaining_uncertainty(&[1.0], &[s], w);
        prop_assert!((ru - (w - s.abs())).abs() <= 1e-12);
        prop_assert_eq!(stopping_check(&[1.0], &[s], w), ru < 0.0);
    }
}
