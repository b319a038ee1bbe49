//! Arms, link functions, labeled data and Fisher information.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::Design;
use crate::linalg::{self, Cholesky, Matrix};
use crate::{CoreError, Result};

/// Relative ridge added to every Fisher matrix: `JITTER_REL · trace/d · I`.
pub const JITTER_REL: f64 = 1e-10;

/// Borrowed view of one arm of an [`ArmSet`].
#[derive(Debug, Clone, Copy)]
pub struct Arm<'a> {
    pub index: usize,
    pub features: &'a [f64],
}

/// Finite set of feature vectors with `‖z‖₂ ≤ 1`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    dim: usize,
    data: Vec<f64>,
}

impl ArmSet {
    /// Builds an arm set from rows that already satisfy `‖z‖ ≤ 1`.
    ///
    /// Use [`normalize_armset`] for raw embeddings.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(CoreError::Empty("arm set"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(CoreError::InvalidParameter("arm dimension must be at least 1"));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(CoreError::DimensionMismatch { expected: dim, found: r.len() });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::NonFinite("arm features"));
            }
            if linalg::norm(r) > 1.0 + 1e-12 {
                return Err(CoreError::Domain("arm norm exceeds 1"));
            }
            data.extend_from_slice(r);
        }
        Ok(ArmSet { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn features(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn arm(&self, i: usize) -> Arm<'_> {
        Arm { index: i, features: self.features(i) }
    }

    pub fn iter(&self) -> impl Iterator<Item = Arm<'_>> + '_ {
        (0..self.len()).map(move |i| self.arm(i))
    }

    /// `zᵢᵀθ` for every arm.
    pub fn scores(&self, theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.dim);
        (0..self.len()).map(|i| linalg::dot(self.features(i), theta)).collect()
    }

    /// New arm set holding the given rows, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<ArmSet> {
        if indices.is_empty() {
            return Err(CoreError::Empty("arm subset"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(CoreError::InvalidIndex { index: i, len: self.len() });
            }
            data.extend_from_slice(self.features(i));
        }
        Ok(ArmSet { dim: self.dim, data })
    }

    pub(crate) fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(CoreError::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(())
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(CoreError::InvalidIndex { index: i, len: self.len() });
        }
        Ok(())
    }
}

/// Feature of a pair: `emb_chosen − emb_rejected`.
///
/// Swapping the arguments negates the result exactly.
pub fn build_feature(emb_chosen: &[f64], emb_rejected: &[f64]) -> Result<Vec<f64>> {
    if emb_chosen.len() != emb_rejected.len() {
        return Err(CoreError::DimensionMismatch {
            expected: emb_chosen.len(),
            found: emb_rejected.len(),
        });
    }
    Ok(emb_chosen.iter().zip(emb_rejected).map(|(a, b)| a - b).collect())
}

/// Divides every row by the largest row norm, so the largest norm becomes 1.
pub fn normalize_armset(raw: &[Vec<f64>]) -> Result<ArmSet> {
    let first = raw.first().ok_or(CoreError::Empty("raw feature vectors"))?;
    let dim = first.len();
    let mut max_norm: f64 = 0.0;
    for r in raw {
        if r.len() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, found: r.len() });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonFinite("raw feature vectors"));
        }
        max_norm = max_norm.max(linalg::norm(r));
    }
    if max_norm == 0.0 {
        return Err(CoreError::AllZero);
    }
    let rows: Vec<Vec<f64>> =
        raw.iter().map(|r| r.iter().map(|x| x / max_norm).collect()).collect();
    ArmSet::new(&rows)
}

/// Monotone link `ψ` mapping a score `zᵀθ` to `P(y = 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkFunction {
    #[default]
    Logistic,
    /// `(u + 1)/2` on `[-1, 1]`.
    Linear,
    /// Standard normal CDF.
    GaussianCdf,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + libm::exp(-u))
    } else {
        let e = libm::exp(u);
        e / (1.0 + e)
    }
}

/// Logistic derivative `σ(u)(1 − σ(u))`, accurate in both tails.
#[inline]
pub fn sigmoid_derivative(u: f64) -> f64 {
    let e = libm::exp(-libm::fabs(u));
    e / ((1.0 + e) * (1.0 + e))
}

impl LinkFunction {
    fn check(self, u: f64) -> Result<()> {
        if u.is_nan() {
            return Err(CoreError::NonFinite("link argument"));
        }
        if self == LinkFunction::Linear && !(-1.0..=1.0).contains(&u) {
            return Err(CoreError::Domain("linear link requires u in [-1, 1]"));
        }
        Ok(())
    }

    /// `ψ(u)`.
    pub fn eval(self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok(match self {
            LinkFunction::Logistic => sigmoid(u),
            LinkFunction::Linear => (u + 1.0) / 2.0,
            LinkFunction::GaussianCdf => 0.5 * libm::erfc(-u / core::f64::consts::SQRT_2),
        })
    }

    /// `ψ'(u)`, the curvature weight `μ̇` in Fisher matrices.
    pub fn derivative(self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok(match self {
            LinkFunction::Logistic => sigmoid_derivative(u),
            LinkFunction::Linear => 0.5,
            LinkFunction::GaussianCdf => INV_SQRT_2PI * libm::exp(-0.5 * u * u),
        })
    }

    /// `ψ''(u)`.
    pub fn second_derivative(self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok(match self {
            LinkFunction::Logistic => sigmoid_derivative(u) * (1.0 - 2.0 * sigmoid(u)),
            LinkFunction::Linear => 0.0,
            LinkFunction::GaussianCdf => -u * INV_SQRT_2PI * libm::exp(-0.5 * u * u),
        })
    }

    /// `μ̇(zᵢᵀθ)` for every arm.
    pub fn curvatures(self, arms: &ArmSet, theta: &[f64]) -> Result<Vec<f64>> {
        arms.check_dim(theta)?;
        arms.scores(theta).into_iter().map(|u| self.derivative(u)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logistic => "logistic",
            LinkFunction::Linear => "linear",
            LinkFunction::GaussianCdf => "gaussian-cdf",
        }
    }
}

/// `ψ(u)` (see [`LinkFunction::eval`]).
pub fn link_eval(link: LinkFunction, u: f64) -> Result<f64> {
    link.eval(u)
}

/// `ψ'(u)` (see [`LinkFunction::derivative`]).
pub fn link_derivative(link: LinkFunction, u: f64) -> Result<f64> {
    link.derivative(u)
}

/// Ground truth for simulation: `P(y = 1 | z) = ψ(zᵀθ*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub theta_star: Vec<f64>,
    pub link: LinkFunction,
}

impl TrueModel {
    pub fn new(theta_star: Vec<f64>, link: LinkFunction) -> Self {
        TrueModel { theta_star, link }
    }

    /// `Δ = min_z |zᵀθ*|`.
    pub fn margin(&self, arms: &ArmSet) -> Result<f64> {
        arms.check_dim(&self.theta_star)?;
        Ok(arms.scores(&self.theta_star).into_iter().map(libm::fabs).fold(f64::INFINITY, f64::min))
    }

    /// Checks dimensions and rejects zero-margin instances.
    pub fn validate(&self, arms: &ArmSet) -> Result<()> {
        if self.margin(arms)? <= 0.0 {
            return Err(CoreError::ZeroMargin);
        }
        Ok(())
    }

    /// `κ₀ = min_z μ̇(zᵀθ*)`.
    pub fn kappa0(&self, arms: &ArmSet) -> Result<f64> {
        Ok(self.link.curvatures(arms, &self.theta_star)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// `P(y = 1)` for every arm.
    pub fn probabilities(&self, arms: &ArmSet) -> Result<Vec<f64>> {
        arms.check_dim(&self.theta_star)?;
        arms.scores(&self.theta_star).into_iter().map(|u| self.link.eval(u)).collect()
    }
}

/// Per-arm sufficient statistics of a labeled dataset: pulls and positive labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmStats {
    pulls: Vec<u64>,
    ones: Vec<u64>,
    total: u64,
}

impl ArmStats {
    pub fn new(n_arms: usize) -> Self {
        ArmStats { pulls: vec![0; n_arms], ones: vec![0; n_arms], total: 0 }
    }

    pub fn n_arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn record(&mut self, arm: usize, label: bool) -> Result<()> {
        self.add(arm, 1, u64::from(label))
    }

    /// Adds `pulls` observations of `arm` of which `ones` were positive.
    pub fn add(&mut self, arm: usize, pulls: u64, ones: u64) -> Result<()> {
        if arm >= self.pulls.len() {
            return Err(CoreError::InvalidIndex { index: arm, len: self.pulls.len() });
        }
        if ones > pulls {
            return Err(CoreError::InvalidParameter("more positive labels than pulls"));
        }
        self.pulls[arm] += pulls;
        self.ones[arm] += ones;
        self.total += pulls;
        Ok(())
    }

    pub fn merge(&mut self, other: &ArmStats) -> Result<()> {
        if other.n_arms() != self.n_arms() {
            return Err(CoreError::DimensionMismatch { expected: self.n_arms(), found: other.n_arms() });
        }
        for i in 0..self.n_arms() {
            self.pulls[i] += other.pulls[i];
            self.ones[i] += other.ones[i];
        }
        self.total += other.total;
        Ok(())
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn ones(&self) -> &[u64] {
        &self.ones
    }

    /// Total number of records `t`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// `t_eff`: number of distinct arm indices with at least one record.
    pub fn t_eff(&self) -> usize {
        self.pulls.iter().filter(|&&p| p > 0).count()
    }

    /// Iterates `(arm, pulls, ones)` over arms with data.
    pub fn observed(&self) -> impl Iterator<Item = (usize, u64, u64)> + '_ {
        self.pulls
            .iter()
            .zip(&self.ones)
            .enumerate()
            .filter(|(_, (p, _))| **p > 0)
            .map(|(i, (p, o))| (i, *p, *o))
    }

    /// Empirical frequency of each arm, as a design.
    pub fn empirical_design(&self) -> Result<Design> {
        if self.total == 0 {
            return Err(CoreError::Empty("dataset"));
        }
        Design::from_counts(&self.pulls)
    }
}

/// Ordered multiset of `(arm index, label)` records, with cached statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    records: Vec<(usize, bool)>,
    stats: ArmStats,
}

impl LabeledDataset {
    pub fn new(n_arms: usize) -> Self {
        LabeledDataset { records: Vec::new(), stats: ArmStats::new(n_arms) }
    }

    pub fn from_records(n_arms: usize, records: &[(usize, bool)]) -> Result<Self> {
        let mut ds = Self::new(n_arms);
        for &(a, y) in records {
            ds.push(a, y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, arm: usize, label: bool) -> Result<()> {
        self.stats.record(arm, label)?;
        self.records.push((arm, label));
        Ok(())
    }

    pub fn records(&self) -> &[(usize, bool)] {
        &self.records
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn t_eff(&self) -> usize {
        self.stats.t_eff()
    }

    pub fn n_arms(&self) -> usize {
        self.stats.n_arms()
    }
}

impl AsRef<ArmStats> for LabeledDataset {
    fn as_ref(&self) -> &ArmStats {
        &self.stats
    }
}

impl AsRef<ArmStats> for ArmStats {
    fn as_ref(&self) -> &ArmStats {
        self
    }
}

/// Symmetric PSD information matrix with a small ridge already added.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    matrix: Matrix,
    jitter: f64,
}

impl FisherMatrix {
    /// Adds `JITTER_REL · trace/d` to the diagonal (or `JITTER_REL` when the
    /// trace is zero).
    pub fn from_raw(mut raw: Matrix) -> Self {
        let d = raw.dim() as f64;
        let tr = raw.trace();
        let jitter = if tr > 0.0 { JITTER_REL * tr / d } else { JITTER_REL };
        raw.add_diag(jitter);
        FisherMatrix { matrix: raw, jitter }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// The matrix without the ridge.
    pub fn raw(&self) -> Matrix {
        let mut m = self.matrix.clone();
        m.add_diag(-self.jitter);
        m
    }

    pub fn factor(&self) -> Result<Cholesky> {
        Cholesky::new(&self.matrix)
    }
}

/// `Σ_i w_i μ̇(zᵢᵀθ) zᵢ zᵢᵀ` without jitter.
pub(crate) fn weighted_information(arms: &ArmSet, weights_times_curv: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(arms.dim());
    for (i, &w) in weights_times_curv.iter().enumerate() {
        if w != 0.0 {
            m.add_outer(w, arms.features(i));
        }
    }
    m
}

/// `H(λ, θ) = Σ_z λ_z μ̇(zᵀθ) z zᵀ` plus jitter.
pub fn fisher_design(design: &Design, theta: &[f64], arms: &ArmSet, link: LinkFunction) -> Result<FisherMatrix> {
    if design.len() != arms.len() {
        return Err(CoreError::DimensionMismatch { expected: arms.len(), found: design.len() });
    }
    design.validate()?;
    let curv = link.curvatures(arms, theta)?;
    let w: Vec<f64> = design.weights().iter().zip(&curv).map(|(l, c)| l * c).collect();
    Ok(FisherMatrix::from_raw(weighted_information(arms, &w)))
}

/// `H′(D, θ) = Σ_s μ̇(z_sᵀθ) z_s z_sᵀ` (unnormalized) plus jitter.
pub fn fisher_data(data: &ArmStats, theta: &[f64], arms: &ArmSet, link: LinkFunction) -> Result<FisherMatrix> {
    if data.is_empty() {
        return Err(CoreError::Empty("dataset"));
    }
    fisher_data_or_prior(data, theta, arms, link)
}

/// Like [`fisher_data`] but an empty dataset yields the jitter-only matrix.
pub(crate) fn fisher_data_or_prior(
    data: &ArmStats,
    theta: &[f64],
    arms: &ArmSet,
    link: LinkFunction,
) -> Result<FisherMatrix> {
    if data.n_arms() != arms.len() {
        return Err(CoreError::DimensionMismatch { expected: arms.len(), found: data.n_arms() });
    }
    arms.check_dim(theta)?;
    let mut m = Matrix::zeros(arms.dim());
    for (i, pulls, _) in data.observed() {
        let z = arms.features(i);
        let c = link.derivative(linalg::dot(z, theta))?;
        m.add_outer(pulls as f64 * c, z);
    }
    Ok(FisherMatrix::from_raw(m))
}

/// `‖z‖_{M⁻¹} = √(zᵀ M⁻¹ z)` via a Cholesky solve.
pub fn inv_norm(z: &[f64], m: &FisherMatrix) -> Result<f64> {
    if z.len() != m.dim() {
        return Err(CoreError::DimensionMismatch { expected: m.dim(), found: z.len() });
    }
    let c = m.factor()?;
    Ok(libm::sqrt(c.inv_quad(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn link_values() {
        let l = LinkFunction::Logistic;
        assert_eq!(l.eval(0.0).unwrap(), 0.5);
        assert!((l.eval(1.0).unwrap() - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert_eq!(l.derivative(0.0).unwrap(), 0.25);
        assert!((l.derivative(1.0).unwrap() - 0.196_611_933_241_481_85).abs() < 1e-15);
        assert_eq!(l.derivative(3.0).unwrap(), l.derivative(-3.0).unwrap());
        assert_eq!(LinkFunction::Linear.eval(1.0).unwrap(), 1.0);
        assert_eq!(
            LinkFunction::Linear.eval(1.5).unwrap_err(),
            CoreError::Domain("linear link requires u in [-1, 1]")
        );
        assert!(LinkFunction::Linear.derivative(-2.0).is_err());
        let g = LinkFunction::GaussianCdf;
        assert!((g.eval(0.0).unwrap() - 0.5).abs() < 1e-16);
        assert!((g.eval(1.0).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-14);
    }

    #[test]
    fn logistic_tails_are_stable() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid_derivative(-40.0) > 0.0);
    }

    #[test]
    fn feature_construction() {
        assert_eq!(build_feature(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(build_feature(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(build_feature(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalization() {
        let a = normalize_armset(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(a.features(0), &[1.0, 0.0]);
        assert_eq!(a.features(1), &[0.0, 0.5]);
        let b = normalize_armset(&[vec![0.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(b.features(0), &[0.0, 0.0]);
        assert_eq!(b.features(1), &[0.0, 1.0]);
        let rows = vec![vec![0.6, 0.8], vec![0.1, 0.2]];
        let c = normalize_armset(&rows).unwrap();
        for (i, r) in rows.iter().enumerate() {
            for (x, y) in c.features(i).iter().zip(r) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
        assert_eq!(normalize_armset(&[vec![0.0; 3]]).unwrap_err(), CoreError::AllZero);
        assert!(normalize_armset(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(normalize_armset(&[]).is_err());
    }

    #[test]
    fn armset_rejects_long_rows() {
        assert!(ArmSet::new(&[vec![1.0, 1.0]]).is_err());
        assert!(ArmSet::new(&[]).is_err());
    }

    #[test]
    fn fisher_design_examples() {
        let arms = ArmSet::new(&[e(2, 0), e(2, 1)]).unwrap();
        let lam = Design::new(vec![0.5, 0.5]).unwrap();
        let h = fisher_design(&lam, &[0.0, 0.0], &arms, LinkFunction::Logistic).unwrap();
        let raw = h.raw();
        assert!((raw.get(0, 0) - 0.125).abs() < 1e-15);
        assert!((raw.get(1, 1) - 0.125).abs() < 1e-15);
        assert_eq!(raw.get(0, 1), 0.0);
        assert!((h.jitter() - 1.25e-11).abs() < 1e-25);

        let point = Design::point_mass(2, 1);
        let h = fisher_design(&point, &[0.0, 0.0], &arms, LinkFunction::Logistic).unwrap();
        assert!((h.raw().get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(h.raw().get(0, 0), 0.0);
    }

    #[test]
    fn fisher_design_rejects_bad_simplex() {
        let arms = ArmSet::new(&[e(2, 0), e(2, 1)]).unwrap();
        assert!(Design::new(vec![0.5, 0.6]).is_err());
        let bad = Design::from_weights_unchecked(vec![0.7, 0.7]);
        assert!(matches!(
            fisher_design(&bad, &[0.0, 0.0], &arms, LinkFunction::Logistic),
            Err(CoreError::InvalidSimplex { .. })
        ));
    }

    #[test]
    fn fisher_data_examples() {
        let arms = ArmSet::new(&[e(3, 0), e(3, 1), e(3, 2)]).unwrap();
        let ds = LabeledDataset::from_records(3, &[(0, true), (0, false), (0, true), (0, true)]).unwrap();
        let h = fisher_data(ds.stats(), &[0.0; 3], &arms, LinkFunction::Logistic).unwrap();
        let raw = h.raw();
        assert!((raw.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(raw.get(1, 1).abs() < 1e-15 && raw.get(2, 2).abs() < 1e-15);
        let empty = LabeledDataset::new(3);
        assert_eq!(
            fisher_data(empty.stats(), &[0.0; 3], &arms, LinkFunction::Logistic).unwrap_err(),
            CoreError::Empty("dataset")
        );
    }

    #[test]
    fn inv_norm_examples() {
        let m = FisherMatrix { matrix: Matrix::diag(&[4.0, 1.0]), jitter: 0.0 };
        assert!((inv_norm(&[1.0, 0.0], &m).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(inv_norm(&[0.0, 0.0], &m).unwrap(), 0.0);
        let sing = FisherMatrix { matrix: Matrix::diag(&[1.0, 0.0]), jitter: 0.0 };
        assert_eq!(inv_norm(&[0.0, 1.0], &sing).unwrap_err(), CoreError::Singular);
    }

    #[test]
    fn dataset_tracks_t_eff_and_validates_indices() {
        let mut ds = LabeledDataset::new(2);
        ds.push(1, true).unwrap();
        ds.push(1, false).unwrap();
        assert_eq!(ds.t_eff(), 1);
        assert_eq!(ds.len(), 2);
        assert!(ds.push(2, true).is_err());
        assert_eq!(ds.len(), 2);
    }
}
