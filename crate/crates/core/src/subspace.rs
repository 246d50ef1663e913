//! Subspaces of `R^d`, low-rank Gaussian models and coordinate index sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_TOL: f64 = 1e-9;

/// Vectors with Euclidean norm below this are treated as zero.
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("all input vectors are (numerically) zero")]
    AllZero,
    #[error("no input vectors supplied")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis columns are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("factor matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("index {index} outside universe [1, {universe}]")]
    IndexOutOfRange { index: usize, universe: usize },
    #[error("duplicate index {0}")]
    DuplicateIndex(usize),
}

/// Numerical rank of `m`: number of singular values above `rel_tol` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max <= ZERO_NORM {
        return 0;
    }
    sv.iter().filter(|&&x| x > rel_tol * max).count()
}

/// A `k`-dimensional linear subspace of `R^d`, stored as a `d x k` matrix with
/// orthonormal columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps an existing orthonormal basis. Fails when `basis^T basis` deviates
    /// from the identity by more than `1e-9` in any entry.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self, LinalgError> {
        if basis.ncols() == 0 {
            return Err(LinalgError::Empty);
        }
        if basis.ncols() > basis.nrows() {
            return Err(LinalgError::DimensionMismatch { expected: basis.nrows(), got: basis.ncols() });
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if dev > 1e-9 {
            return Err(LinalgError::NotOrthonormal(dev));
        }
        Ok(Self { basis })
    }

    /// `span(e_1, ..., e_k)` in `R^d`.
    pub fn axis(d: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= d, "axis subspace needs 1 <= k <= d");
        let mut basis = DMatrix::zeros(d, k);
        for j in 0..k {
            basis[(j, j)] = 1.0;
        }
        Self { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `U z` for a coefficient vector `z`.
    pub fn embed(&self, coeffs: &[f64]) -> DVector<f64> {
        &self.basis * DVector::from_column_slice(coeffs)
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn residual_norm(&self, v: &[f64]) -> Result<f64, LinalgError> {
        let p = project(self, v)?;
        Ok(v.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }
}

/// Orthonormal basis of `span(vectors)`, via a thin SVD of the column matrix.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Subspace, LinalgError> {
    let first = vectors.first().ok_or(LinalgError::Empty)?;
    let d = first.len();
    if d == 0 {
        return Err(LinalgError::Empty);
    }
    for v in vectors {
        if v.len() != d {
            return Err(LinalgError::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    if vectors.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt() < ZERO_NORM) {
        return Err(LinalgError::AllZero);
    }
    let m = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    orthonormalize_columns(&m)
}

/// Same as [`orthonormalize`] for vectors given as the columns of `m`.
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> Result<Subspace, LinalgError> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Err(LinalgError::Empty);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max < ZERO_NORM {
        return Err(LinalgError::AllZero);
    }
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > RANK_TOL * max).collect();
    let basis = DMatrix::from_fn(m.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
    Ok(Subspace { basis })
}

/// Orthogonal projection of `v` onto `u`.
pub fn project(u: &Subspace, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if v.len() != u.ambient_dim() {
        return Err(LinalgError::DimensionMismatch { expected: u.ambient_dim(), got: v.len() });
    }
    let v = DVector::from_column_slice(v);
    let coeffs = u.basis.transpose() * v;
    Ok((&u.basis * coeffs).as_slice().to_vec())
}

/// Sine of the largest principal angle between `u` and `v`.
///
/// Computed as `max(||(I - P_v) Q_u||_2, ||(I - P_u) Q_v||_2)`, which equals the
/// sine of the largest angle for equal dimensions and is 1 whenever one
/// subspace strictly contains the other.
pub fn principal_angle_distance(u: &Subspace, v: &Subspace) -> Result<f64, LinalgError> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(LinalgError::DimensionMismatch { expected: u.ambient_dim(), got: v.ambient_dim() });
    }
    fn one_sided(a: &Subspace, b: &Subspace) -> f64 {
        let qa = &a.basis;
        let qb = &b.basis;
        let resid = qa - qb * (qb.transpose() * qa);
        resid.svd(false, false).singular_values.iter().cloned().fold(0.0_f64, f64::max)
    }
    Ok(one_sided(u, v).max(one_sided(v, u)).min(1.0))
}

/// `N(mean, A^T A)` with a `k x d` factor `A` of full row rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
    coord_bound: f64,
}

impl GaussianModel {
    pub fn new(mean: Vec<f64>, factor: DMatrix<f64>) -> Result<Self, LinalgError> {
        let d = factor.ncols();
        if mean.len() != d {
            return Err(LinalgError::DimensionMismatch { expected: d, got: mean.len() });
        }
        let k = factor.nrows();
        if k == 0 || k > d {
            return Err(LinalgError::RankDeficient { rank: 0, expected: k });
        }
        let rank = numerical_rank(&factor, RANK_TOL);
        if rank != k {
            return Err(LinalgError::RankDeficient { rank, expected: k });
        }
        let coord_bound = (0..d)
            .map(|j| factor.column(j).norm_squared())
            .fold(0.0_f64, f64::max)
            .sqrt();
        Ok(Self { mean, factor, coord_bound })
    }

    /// Standard Gaussian on the first `k` coordinates, centered at `mean`.
    pub fn axis(mean: Vec<f64>, k: usize) -> Result<Self, LinalgError> {
        let d = mean.len();
        let mut factor = DMatrix::zeros(k, d);
        for i in 0..k.min(d) {
            factor[(i, i)] = 1.0;
        }
        Self::new(mean, factor)
    }

    pub fn ambient_dim(&self) -> usize {
        self.factor.ncols()
    }

    pub fn rank(&self) -> usize {
        self.factor.nrows()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `B = sqrt(max_i Sigma_ii)`.
    pub fn coord_bound(&self) -> f64 {
        self.coord_bound
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.factor.transpose() * &self.factor
    }

    /// The same model with the factor rescaled so that `coord_bound() == b`.
    pub fn rescaled(&self, b: f64) -> Self {
        let scale = b / self.coord_bound;
        Self { mean: self.mean.clone(), factor: &self.factor * scale, coord_bound: b }
    }

    /// Column space of the covariance.
    pub fn subspace(&self) -> Subspace {
        orthonormalize_columns(&self.factor.transpose()).expect("factor has full row rank")
    }

    /// `Span(U ∪ {mean})`, the subspace every clean sample lies in.
    pub fn subspace_with_mean(&self) -> Subspace {
        let d = self.ambient_dim();
        let k = self.rank();
        let m = DMatrix::from_fn(d, k + 1, |i, j| if j < k { self.factor[(j, i)] } else { self.mean[i] });
        orthonormalize_columns(&m).expect("factor has full row rank")
    }
}

/// A sorted, duplicate-free subset of `[1, universe]` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    elements: Vec<usize>,
    universe: usize,
}

impl IndexSet {
    pub fn new(mut elements: Vec<usize>, universe: usize) -> Result<Self, LinalgError> {
        elements.sort_unstable();
        for w in elements.windows(2) {
            if w[0] == w[1] {
                return Err(LinalgError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&bad) = elements.iter().find(|&&e| e == 0 || e > universe) {
            return Err(LinalgError::IndexOutOfRange { index: bad, universe });
        }
        Ok(Self { elements, universe })
    }

    /// Builds from 0-based coordinates.
    pub fn from_zero_based(indices: impl IntoIterator<Item = usize>, universe: usize) -> Result<Self, LinalgError> {
        Self::new(indices.into_iter().map(|i| i + 1).collect(), universe)
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.elements.iter().map(|e| e - 1)
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.elements.binary_search(&e).is_ok()
    }

    /// Size of the intersection, by sorted merge.
    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        let (a, b) = (&self.elements, &other.elements);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Rank by Gram-Schmidt with re-orthogonalization; independent of the SVD path.
    fn gram_schmidt_rank(vectors: &[Vec<f64>]) -> usize {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in vectors {
            let mut w = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= dot * bi;
                    }
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                basis.push(w.iter().map(|x| x / norm).collect());
            }
        }
        basis.len()
    }

    #[test]
    fn orthonormalize_examples() {
        let u = orthonormalize(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(u.dim(), 2);
        assert!(u.residual_norm(&[0.3, -2.0, 0.0]).unwrap() < 1e-12);

        let u = orthonormalize(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(u.dim(), 1);
        assert!(close(u.basis()[(0, 0)].abs(), 1.0, 1e-12));

        let vs = vec![vec![1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![2.0, 0.0, 0.0]];
        let u = orthonormalize(&vs).unwrap();
        assert_eq!(u.dim(), gram_schmidt_rank(&vs));
        assert_eq!(u.dim(), 2);
        let e12 = Subspace::axis(3, 2);
        assert!(principal_angle_distance(&u, &e12).unwrap() < 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_zero_input() {
        assert_eq!(orthonormalize(&[vec![0.0, 0.0], vec![1e-14, 0.0]]), Err(LinalgError::AllZero));
        assert!(matches!(
            orthonormalize(&[vec![1.0, 0.0], vec![1.0]]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn project_examples() {
        let e1 = Subspace::axis(2, 1);
        assert_eq!(project(&e1, &[3.0, 4.0]).unwrap(), vec![3.0, 0.0]);

        let diag = orthonormalize(&[vec![1.0, 1.0]]).unwrap();
        let p = project(&diag, &[1.0, 0.0]).unwrap();
        assert!(close(p[0], 0.5, 1e-12) && close(p[1], 0.5, 1e-12));

        let inside = project(&diag, &[2.0, 2.0]).unwrap();
        assert!(close(inside[0], 2.0, 1e-12) && close(inside[1], 2.0, 1e-12));
        assert!(matches!(project(&diag, &[1.0]), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = Subspace::axis(2, 1);
        let e2 = orthonormalize(&[vec![0.0, 1.0]]).unwrap();
        let diag = orthonormalize(&[vec![1.0, 1.0]]).unwrap();
        assert!(principal_angle_distance(&e1, &e1).unwrap() < 1e-15);
        assert!(close(principal_angle_distance(&e1, &e2).unwrap(), 1.0, 1e-12));
        let expected = std::f64::consts::FRAC_PI_4.sin();
        assert!(close(principal_angle_distance(&e1, &diag).unwrap(), expected, 1e-12));
        // strict containment is never distance zero
        assert!(close(principal_angle_distance(&e1, &Subspace::axis(2, 2)).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn gaussian_model_invariants() {
        let factor = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 1.0]);
        let m = GaussianModel::new(vec![0.0; 3], factor).unwrap();
        // Sigma diagonal: 1, 9, 5
        assert!(close(m.coord_bound(), 3.0, 1e-12));
        let cov = m.covariance();
        let max_diag = (0..3).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        assert!(close(m.coord_bound(), max_diag.sqrt(), 1e-9 * max_diag.sqrt()));
        assert_eq!(m.subspace().dim(), 2);
        assert!(close(m.rescaled(1.0).coord_bound(), 1.0, 1e-12));

        let rank_deficient = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            GaussianModel::new(vec![0.0; 2], rank_deficient),
            Err(LinalgError::RankDeficient { rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn subspace_with_mean_adds_direction() {
        let m = GaussianModel::axis(vec![0.0, 0.0, 0.0, 0.0, 7.0], 2).unwrap();
        let u = m.subspace_with_mean();
        assert_eq!(u.dim(), 3);
        let inside = GaussianModel::axis(vec![1.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(inside.subspace_with_mean().dim(), 2);
    }

    #[test]
    fn index_set_validation() {
        let s = IndexSet::new(vec![3, 1, 2], 5).unwrap();
        assert_eq!(s.elements(), &[1, 2, 3]);
        assert_eq!(s.zero_based().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(IndexSet::new(vec![1, 1], 5), Err(LinalgError::DuplicateIndex(1)));
        assert!(matches!(IndexSet::new(vec![0], 5), Err(LinalgError::IndexOutOfRange { .. })));
        assert!(matches!(IndexSet::new(vec![6], 5), Err(LinalgError::IndexOutOfRange { .. })));
        let t = IndexSet::new(vec![2, 3, 4], 5).unwrap();
        assert_eq!(s.intersection_len(&t), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vectors() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
            (2usize..8).prop_flat_map(|d| {
                (
                    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), 1..d + 2),
                    prop::collection::vec(-5.0..5.0f64, d),
                )
            })
        }

        proptest! {
            #[test]
            fn projection_splits_orthogonally((vs, v) in vectors()) {
                prop_assume!(vs.iter().any(|w| w.iter().any(|x| x.abs() > 1e-3)));
                let u = orthonormalize(&vs).unwrap();
                let p = project(&u, &v).unwrap();
                let r: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
                for i in 0..v.len() {
                    prop_assert!((p[i] + r[i] - v[i]).abs() < 1e-8);
                }
                let dot: f64 = p.iter().zip(&r).map(|(a, b)| a * b).sum();
                prop_assert!(dot.abs() < 1e-8);
                let pp = project(&u, &p).unwrap();
                for i in 0..v.len() {
                    prop_assert!((pp[i] - p[i]).abs() < 1e-8);
                }
            }

            #[test]
            fn orthonormalize_is_span_idempotent((vs, _v) in vectors()) {
                prop_assume!(vs.iter().any(|w| w.iter().any(|x| x.abs() > 1e-3)));
                let u = orthonormalize(&vs).unwrap();
                let again = orthonormalize_columns(u.basis()).unwrap();
                prop_assert_eq!(again.dim(), u.dim());
                prop_assert!(principal_angle_distance(&u, &again).unwrap() < 1e-9);
                let gram = u.basis().transpose() * u.basis();
                prop_assert!((gram - DMatrix::identity(u.dim(), u.dim())).amax() < 1e-9);
            }
        }
    }
}
