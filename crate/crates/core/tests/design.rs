mod common;

use common::*;
use prefdesign_core::design::{
    alg2_objective, apportion, d_optimal_pick, objective_value, round_design, rounding_margin, rounding_requirement,
    solve_design, Design, DesignProblem, SolverConfig,
};
use prefdesign_core::estimator::{gamma_d, ConfidenceSpec};
use prefdesign_core::model::{ArmSet, ArmStats, LinkFunction};
use proptest::prelude::*;
use rand::Rng;

const LOGISTIC: LinkFunction = LinkFunction::Logistic;

/// Objective of a weighted design evaluated with an explicit inverse.
fn brute_objective(arms: &ArmSet, curv: &[f64], lam: &[f64], targets: &[usize], w: &[f64]) -> f64 {
    let weights: Vec<f64> = lam.iter().zip(curv).map(|(a, b)| a * b).collect();
    let m = naive_info(arms, &weights);
    targets.iter().zip(w).map(|(&t, wt)| wt * quad_inv(&m, arms.features(t))).fold(0.0, f64::max)
}

#[test]
fn kiefer_wolfowitz_value() {
    let mut r = rng(31);
    for _ in 0..10 {
        let d = r.random_range(2..6);
        let n = d + r.random_range(0..20);
        let arms = random_arms(&mut r, n, d);
        let p = DesignProblem::g_optimal(&arms, &vec![0.0; d], LOGISTIC).unwrap();
        let (_, rep) = solve_design(&p, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.value - 4.0 * d as f64).abs() <= 0.02 * 4.0 * d as f64, "{} vs {}", rep.value, 4 * d);
        assert!(rep.lower_bound <= 4.0 * d as f64 * (1.0 + 1e-9));
    }
    let b = basis(4);
    let p = DesignProblem::g_optimal(&b, &[0.0; 4], LOGISTIC).unwrap();
    let (lam, rep) = solve_design(&p, &SolverConfig::default()).unwrap();
    assert!((rep.value - 16.0).abs() < 0.16);
    for w in lam.weights() {
        assert!((w - 0.25).abs() < 1e-6);
    }
}

#[test]
fn two_arm_closed_form_and_grid() {
    let arms = basis(2);
    let w = [1.0, 4.0];
    let p = DesignProblem::new(&arms, &[0.0, 0.0], LOGISTIC, vec![0, 1], w.to_vec()).unwrap();
    let (lam, rep) = solve_design(&p, &SolverConfig::default()).unwrap();
    // Grid over the 1-simplex.
    let curv = [0.25, 0.25];
    let grid_best = (1..10_000)
        .map(|k| {
            let a = k as f64 / 10_000.0;
            brute_objective(&arms, &curv, &[a, 1.0 - a], &[0, 1], &w)
        })
        .fold(f64::INFINITY, f64::min);
    assert!((grid_best - 20.0).abs() < 1e-3);
    assert!((rep.value - 20.0) / 20.0 <= rep.duality_gap + 1e-12);
    assert!(rep.duality_gap <= 1e-3);
    assert!((lam.weights()[0] - 0.2).abs() < 5e-3);
}

#[test]
fn certified_gap_bounds_true_suboptimality() {
    // Two-arm instances with w = (a, b): optimum (√a + √b)²/c at constant curvature c.
    let arms = basis(2);
    let mut r = rng(32);
    for _ in 0..20 {
        let a: f64 = r.random_range(0.1..10.0);
        let b: f64 = r.random_range(0.1..10.0);
        let opt = (a.sqrt() + b.sqrt()).powi(2) / 0.25;
        let p = DesignProblem::new(&arms, &[0.0, 0.0], LOGISTIC, vec![0, 1], vec![a, b]).unwrap();
        for tol in [1e-2, 1e-3] {
            let (_, rep) = solve_design(&p, &SolverConfig { tol, ..SolverConfig::default() }).unwrap();
            assert!((rep.value - opt) / opt <= rep.duality_gap + 1e-9);
            assert!(rep.lower_bound <= opt * (1.0 + 1e-9));
        }
    }
}

#[test]
fn incumbent_history_is_nonincreasing() {
    let mut r = rng(33);
    for _ in 0..5 {
        let arms = random_arms(&mut r, 30, 5);
        let theta = uniform_vec(&mut r, 5, -1.0, 1.0);
        let p = DesignProblem::g_optimal(&arms, &theta, LOGISTIC).unwrap();
        let (_, rep) = solve_design(&p, &SolverConfig { record_history: true, ..SolverConfig::default() }).unwrap();
        assert!(!rep.history.is_empty());
        for w in rep.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn objective_matches_brute_force_and_beats_uniform() {
    let mut r = rng(34);
    for _ in 0..10 {
        let n = 12;
        let d = 3;
        let arms = random_arms(&mut r, n, d);
        let theta = uniform_vec(&mut r, d, -1.0, 1.0);
        let targets: Vec<usize> = (0..n).filter(|_| r.random_bool(0.5)).chain([0]).collect();
        let w: Vec<f64> = targets.iter().map(|_| r.random_range(0.5..5.0)).collect();
        let p = DesignProblem::new(&arms, &theta, LOGISTIC, targets.clone(), w.clone()).unwrap();
        let lam = random_simplex(&mut r, n);
        let curv: Vec<f64> = (0..n).map(|i| sigmoid_prime(dot(arms.features(i), &theta))).collect();
        let got = objective_value(&Design::new(lam.clone()).unwrap(), &p).unwrap();
        let want = brute_objective(&arms, &curv, &lam, &targets, &w);
        assert!((got.value - want).abs() < 1e-6 * want);
        assert!(!got.singular);
        let (_, rep) = solve_design(&p, &SolverConfig::default()).unwrap();
        let uni = objective_value(&Design::uniform(n).unwrap(), &p).unwrap().value;
        assert!(rep.value <= uni);
    }
}

#[test]
fn singular_design_is_flagged() {
    let arms = basis(2);
    let p = DesignProblem::g_optimal(&arms, &[0.0, 0.0], LOGISTIC).unwrap();
    let v = objective_value(&Design::point_mass(2, 0), &p).unwrap();
    assert!(v.singular);
    assert!(v.value.is_finite() && v.value > 1e6);
}

#[test]
fn scaling_weights_keeps_argmin() {
    let mut r = rng(35);
    let arms = random_arms(&mut r, 20, 4);
    let theta = uniform_vec(&mut r, 4, -1.0, 1.0);
    let w: Vec<f64> = (0..20).map(|_| r.random_range(0.5..3.0)).collect();
    let p1 = DesignProblem::new(&arms, &theta, LOGISTIC, (0..20).collect(), w.clone()).unwrap();
    let p2 = DesignProblem::new(&arms, &theta, LOGISTIC, (0..20).collect(), w.iter().map(|x| 7.5 * x).collect()).unwrap();
    let (l1, r1) = solve_design(&p1, &SolverConfig::default()).unwrap();
    let (l2, r2) = solve_design(&p2, &SolverConfig::default()).unwrap();
    for (a, b) in l1.weights().iter().zip(l2.weights()) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((r2.value - 7.5 * r1.value).abs() < 1e-6 * r2.value);
}

#[test]
fn alg2_objective_weights() {
    let arms = basis(3);
    let theta = [0.0; 3];
    let spec = ConfidenceSpec::new(0.1, 3, 3).unwrap();
    let g = gamma_d(&spec);
    let p = alg2_objective(&arms, &[1], &theta, LOGISTIC, 1.0, 0.1, 3).unwrap();
    assert!(p.target_weights().iter().all(|w| (w - g).abs() < 1e-12));
    let eps = 0.01;
    let big = 2.4f64 * 2.4 / (eps * eps);
    assert!(big > g);
    let p = alg2_objective(&arms, &[0, 1, 2], &theta, LOGISTIC, eps, 0.1, 3).unwrap();
    assert!(p.target_weights().iter().all(|w| (w - big).abs() < 1e-9));
    let p = alg2_objective(&arms, &[2], &theta, LOGISTIC, 1e-4, 0.1, 3).unwrap();
    let (lam, _) = solve_design(&p, &SolverConfig::default()).unwrap();
    let single = DesignProblem::new(&arms, &theta, LOGISTIC, vec![2], vec![1.0]).unwrap();
    let (lam_single, _) = solve_design(&single, &SolverConfig::default()).unwrap();
    assert!(lam.weights()[2] > 0.9);
    assert!((lam.weights()[2] - lam_single.weights()[2]).abs() < 0.1);
    assert!(alg2_objective(&arms, &[], &theta, LOGISTIC, 0.5, 0.1, 3).is_err());
}

#[test]
fn d_optimal_matches_determinant_loop() {
    let mut r = rng(36);
    for _ in 0..20 {
        let n = 8;
        let d = 3;
        let arms = random_arms(&mut r, n, d);
        let theta = uniform_vec(&mut r, d, -1.0, 1.0);
        let mut hist = ArmStats::new(n);
        for _ in 0..r.random_range(3..20) {
            hist.record(r.random_range(0..n), r.random_bool(0.5)).unwrap();
        }
        let curv: Vec<f64> = (0..n).map(|i| sigmoid_prime(dot(arms.features(i), &theta))).collect();
        let base: Vec<f64> = (0..n).map(|i| hist.pulls()[i] as f64 * curv[i]).collect();
        let m = naive_info(&arms, &base);
        let trace: f64 = (0..d).map(|i| m[i][i]).sum();
        let dets: Vec<f64> = (0..n)
            .map(|i| {
                let mut mm = m.clone();
                let z = arms.features(i);
                for a in 0..d {
                    mm[a][a] += 1e-10 * trace / d as f64;
                    for b in 0..d {
                        mm[a][b] += curv[i] * z[a] * z[b];
                    }
                }
                det(&mm)
            })
            .collect();
        let best = (0..n).max_by(|&a, &b| dets[a].partial_cmp(&dets[b]).unwrap().then(b.cmp(&a))).unwrap();
        let got = d_optimal_pick(&hist, &arms, &theta, LOGISTIC).unwrap();
        assert!(got == best || (dets[got] - dets[best]).abs() <= 1e-9 * dets[best]);
    }
}

#[test]
fn rounding_keeps_loewner_guarantee() {
    let mut r = rng(37);
    for _ in 0..60 {
        let d = r.random_range(1..6);
        let n = d + r.random_range(0..25);
        let arms = random_arms(&mut r, n, d);
        let theta = uniform_vec(&mut r, d, -2.0, 2.0);
        let omega = [0.25, 0.5, 1.0][r.random_range(0..3)];
        let lam = Design::new(random_simplex(&mut r, n)).unwrap();
        let req = rounding_requirement(d, omega);
        let big_n = req + r.random_range(0..3 * req);
        let counts = round_design(&lam, big_n, omega, &arms, &theta, LOGISTIC).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), big_n);
        let nu = rounding_margin(&lam, &counts, &arms, &theta, LOGISTIC).unwrap();
        assert!(nu >= 1.0 / (1.0 + omega) - 1e-9, "{nu}");
    }
}

proptest! {
    #[test]
    fn apportion_sums_and_stays_close(seed in any::<u64>(), n in 1usize..20, total in 0u64..500) {
        let mut r = rng(seed);
        let lam = Design::new(random_simplex(&mut r, n)).unwrap();
        let c = apportion(&lam, total);
        prop_assert_eq!(c.iter().sum::<u64>(), total);
        for (ci, w) in c.iter().zip(lam.weights()) {
            prop_assert!((*ci as f64 - w * total as f64).abs() < 1.0 + 1e-9);
        }
    }
}
