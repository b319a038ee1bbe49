//! Small dense linear algebra for `d×d` information matrices.
//!
//! Dimensions here are a handful to a few dozen, so everything is plain
//! row-major `Vec<f64>` storage with textbook factorizations.

use alloc::vec;
use alloc::vec::Vec;

use crate::{CoreError, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(CoreError::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Ok(Matrix { n, data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = *v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `self += alpha · v vᵀ`
    pub fn add_outer(&mut self, alpha: f64, v: &[f64]) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        for i in 0..n {
            let a = alpha * v[i];
            if a == 0.0 {
                continue;
            }
            let row = &mut self.data[i * n..(i + 1) * n];
            for (r, vj) in row.iter_mut().zip(v) {
                *r += a * vj;
            }
        }
    }

    pub fn add_diag(&mut self, x: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += x;
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// `vᵀ M v`
    pub fn quad(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in 0..i {
                if libm::fabs(self.get(i, j) - self.get(j, i)) > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails with [`CoreError::Singular`] unless `m` is numerically positive definite.
    pub fn new(m: &Matrix) -> Result<Self> {
        let n = m.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut s = m.get(j, j);
            for k in 0..j {
                s -= l[j * n + k] * l[j * n + k];
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(CoreError::Singular);
            }
            let d = libm::sqrt(s);
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// `zᵀ M⁻¹ z`, computed as `‖L⁻¹ z‖²`.
    pub fn inv_quad(&self, z: &[f64]) -> f64 {
        let y = self.forward(z);
        dot(&y, &y)
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * libm::log(self.l[i * self.n + i])).sum()
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the returned matrix.
pub fn sym_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = a.as_slice().iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vecs = Matrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs.set(r, col, v.get(r, src));
        }
    }
    (values, vecs)
}

/// Generalized eigenvalues of the pencil `(a, b)` restricted to the range of `b`.
///
/// `b` must be positive semidefinite. Directions where `b` has eigenvalue
/// below `1e-12 · λ_max(b)` are discarded. Returns ascending eigenvalues and
/// the corresponding vectors `v` in original coordinates, normalized so that
/// `vᵀ b v = 1`.
pub fn generalized_eigen_on_range(a: &Matrix, b: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = b.dim();
    let (w, v) = sym_eigen(b);
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| w[i] > 1e-12 * wmax && w[i] > 0.0).collect();
    let k = keep.len();
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    // P = V_keep · diag(w_keep^{-1/2}); K = Pᵀ a P
    let mut p = vec![vec![0.0; n]; k];
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / libm::sqrt(w[i]);
        for r in 0..n {
            p[c][r] = v.get(r, i) * s;
        }
    }
    let ap: Vec<Vec<f64>> = p.iter().map(|col| a.mul_vec(col)).collect();
    let mut kmat = Matrix::zeros(k);
    for i in 0..k {
        for j in 0..=i {
            let x = dot(&p[i], &ap[j]);
            kmat.set(i, j, x);
            kmat.set(j, i, x);
        }
    }
    let (vals, u) = sym_eigen(&kmat);
    let vecs = (0..k)
        .map(|c| {
            let mut x = vec![0.0; n];
            for (j, pj) in p.iter().enumerate() {
                let coef = u.get(j, c);
                for r in 0..n {
                    x[r] += coef * pj[r];
                }
            }
            x
        })
        .collect();
    (vals, vecs)
}

/// Solves a general square system by Gaussian elimination with partial pivoting.
pub fn solve_general(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(CoreError::DimensionMismatch { expected: n, found: b.len() });
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if libm::fabs(a[r * n + col]) > libm::fabs(a[piv * n + col]) {
                piv = r;
            }
        }
        if libm::fabs(a[piv * n + col]) <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(CoreError::Singular);
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for c in i + 1..n {
            s -= a[i * n + c] * x[c];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}
