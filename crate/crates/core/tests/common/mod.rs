#![allow(dead_code)]

use prefdesign_core::model::ArmSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn basis(d: usize) -> ArmSet {
    ArmSet::new(&basis_rows(d)).unwrap()
}

pub fn basis_rows(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        })
        .collect()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random arm set with the largest row norm scaled to 1.
pub fn random_arms(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ArmSet {
    let raw: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, d, -1.0, 1.0)).collect();
    prefdesign_core::model::normalize_armset(&raw).unwrap()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub fn sigmoid_prime(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 - s)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense inverse by Gauss–Jordan elimination with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        for v in a[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for k in 0..2 * n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Determinant by Gaussian elimination.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap()).unwrap();
        if p != c {
            a.swap(c, p);
            d = -d;
        }
        let piv = a[c][c];
        if piv == 0.0 {
            return 0.0;
        }
        d *= piv;
        for r in c + 1..n {
            let f = a[r][c] / piv;
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

pub fn quad_inv(m: &[Vec<f64>], z: &[f64]) -> f64 {
    let inv = invert(m);
    z.iter().enumerate().map(|(i, zi)| zi * dot(&inv[i], z)).sum()
}

/// `Σ wᵢ zᵢzᵢᵀ` by explicit double loop.
pub fn naive_info(arms: &ArmSet, w: &[f64]) -> Vec<Vec<f64>> {
    let d = arms.dim();
    let mut m = vec![vec![0.0; d]; d];
    for (i, wi) in w.iter().enumerate() {
        let z = arms.features(i);
        for r in 0..d {
            for c in 0..d {
                m[r][c] += wi * z[r] * z[c];
            }
        }
    }
    m
}
