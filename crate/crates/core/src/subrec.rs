//! Recovery of `Span(U ∪ {mean})` from coordinate-corrupted samples.
//!
//! Pivot coordinates `J` grow greedily. For each new coordinate `i`, pair
//! differences of the samples restricted to `J ∪ {i}` are tested for an exact
//! linear relation `y_i = c^T y_J` by consensus regression: fit on random
//! minimal row subsets and accept a fit that a strict majority of rows obeys.
//! Each relation found gives a vector `v` orthogonal to `U`; a majority vote
//! over `v^T x_tilde` then pins down the mean's offset.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::rng_for;
use crate::par::{self, Execution};
use crate::subspace::{orthonormalize, IndexSet, LinalgError, Subspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubrecError {
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("no majority at {stage}: best agreement {fraction:.3}")]
    ConsensusFailure { stage: String, fraction: f64 },
    #[error("consensus rows are ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubrecConfig {
    pub ransac_iterations: usize,
    /// Relative residual under which a row agrees with a fit.
    pub agreement_tol: f64,
    /// Largest accepted condition number of the consensus-row covariance.
    pub max_condition: f64,
    /// Relative width of a majority-vote bucket.
    pub vote_tol: f64,
    /// Regime constant: recovery is expected when `k s <= c0 d`.
    pub c0: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SubrecConfig {
    fn default() -> Self {
        Self {
            ransac_iterations: 200,
            agreement_tol: 1e-6,
            max_condition: 1e8,
            vote_tol: 1e-6,
            c0: 0.05,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl SubrecConfig {
    pub fn in_regime(&self, k: usize, s: usize, d: usize) -> bool {
        (k * s) as f64 <= self.c0 * d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FullRank,
    Dependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressOutcome {
    pub verdict: Verdict,
    /// `c` with `y_last = c^T y_prefix`, when dependent.
    pub weights: Option<Vec<f64>>,
    pub consensus_fraction: f64,
}

fn agrees(row: &[f64], c: &[f64], tol: f64) -> bool {
    let j = c.len();
    let last = row[j];
    let mut pred = 0.0;
    let mut scale = last.abs();
    for l in 0..j {
        let t = c[l] * row[l];
        pred += t;
        scale += t.abs();
    }
    (last - pred).abs() <= tol * scale
}

fn rows_of(samples: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..samples.nrows()).map(|r| samples.row(r).iter().cloned().collect()).collect()
}

fn count_agree(rows: &[Vec<f64>], c: &[f64], tol: f64) -> usize {
    rows.iter().filter(|r| agrees(r, c, tol)).count()
}

fn condition_number(sym: &DMatrix<f64>) -> f64 {
    let eig = sym.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Decides whether the last column of `samples` is an exact linear function
/// of the others on a strict majority of rows. `stream` selects the random
/// substream used for row sampling.
pub fn robust_rank_and_regress(
    samples: &DMatrix<f64>,
    config: &SubrecConfig,
    stream: u64,
) -> Result<RegressOutcome, SubrecError> {
    let m = samples.nrows();
    if samples.ncols() == 0 {
        return Err(SubrecError::DegenerateSample("no columns".into()));
    }
    let j = samples.ncols() - 1;
    if m < j + 1 {
        return Err(SubrecError::DegenerateSample(format!("{m} rows for {} columns", j + 1)));
    }
    let rows = rows_of(samples);
    let tol = config.agreement_tol;
    let majority = |count: usize| 2 * count > m;

    if j == 0 {
        let count = count_agree(&rows, &[], tol);
        let fraction = count as f64 / m as f64;
        return Ok(if majority(count) {
            RegressOutcome { verdict: Verdict::Dependent, weights: Some(Vec::new()), consensus_fraction: fraction }
        } else {
            RegressOutcome { verdict: Verdict::FullRank, weights: None, consensus_fraction: fraction }
        });
    }

    let mut rng = rng_for(config.seed, stream);
    let mut best = 0usize;
    let mut accepted: Option<Vec<f64>> = None;
    let mut any_solvable = false;
    for _ in 0..config.ransac_iterations {
        let pick = sample(&mut rng, m, j);
        let a = DMatrix::from_fn(j, j, |r, c| rows[pick.index(r)][c]);
        let b = DVector::from_fn(j, |r, _| rows[pick.index(r)][j]);
        let Some(c) = a.lu().solve(&b) else { continue };
        if c.iter().any(|v| !v.is_finite()) {
            continue;
        }
        any_solvable = true;
        let c: Vec<f64> = c.iter().cloned().collect();
        let count = count_agree(&rows, &c, tol);
        best = best.max(count);
        if majority(count) {
            accepted = Some(c);
            break;
        }
    }
    if !any_solvable {
        return Err(SubrecError::DegenerateSample("every sampled subsystem was singular".into()));
    }
    let Some(c0) = accepted else {
        return Ok(RegressOutcome {
            verdict: Verdict::FullRank,
            weights: None,
            consensus_fraction: best as f64 / m as f64,
        });
    };

    // refit on the consensus rows
    let inliers: Vec<&Vec<f64>> = rows.iter().filter(|r| agrees(r, &c0, tol)).collect();
    let x = DMatrix::from_fn(inliers.len(), j, |r, c| inliers[r][c]);
    let y = DVector::from_fn(inliers.len(), |r, _| inliers[r][j]);
    let cov = x.transpose() * &x / inliers.len() as f64;
    let cond = condition_number(&cov);
    if !(cond < config.max_condition) {
        return Err(SubrecError::IllConditioned(cond));
    }
    let refit = x.svd(true, true).solve(&y, 1e-14).map_err(|e| SubrecError::DegenerateSample(e.into()))?;
    let refit: Vec<f64> = refit.iter().cloned().collect();
    let (c, count) = {
        let n_refit = count_agree(&rows, &refit, tol);
        let n_orig = count_agree(&rows, &c0, tol);
        if n_refit >= n_orig { (refit, n_refit) } else { (c0, n_orig) }
    };
    Ok(RegressOutcome { verdict: Verdict::Dependent, weights: Some(c), consensus_fraction: count as f64 / m as f64 })
}

/// Sorted copy of `values` with the start and length of the largest group of
/// values within relative width `tol` of the group's smallest element.
fn densest_group(values: &[f64], tol: f64) -> (Vec<f64>, usize, usize) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (mut best_start, mut best_len) = (0, 0);
    let mut end = 0;
    for start in 0..v.len() {
        end = end.max(start);
        let width = tol * v[start].abs().max(1.0);
        while end + 1 < v.len() && v[end + 1] - v[start] <= width {
            end += 1;
        }
        if end + 1 - start > best_len {
            best_len = end + 1 - start;
            best_start = start;
        }
    }
    (v, best_start, best_len)
}

/// Value shared by a strict majority of `values` up to relative width `tol`,
/// with the fraction of values in that group.
pub fn majority_value(values: &[f64], tol: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let (v, start, len) = densest_group(values, tol);
    let fraction = len as f64 / v.len() as f64;
    (2 * len > v.len()).then(|| (v[start + len / 2], fraction))
}

/// Lower median: the element of rank `ceil(n/2)`.
pub fn robust_median(values: &[f64]) -> Result<f64, SubrecError> {
    if values.is_empty() {
        return Err(SubrecError::EmptyInput);
    }
    let mut v = values.to_vec();
    let mid = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(*m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementVector {
    /// Coordinate (0-based) carrying the `-1` entry.
    pub pivot: usize,
    pub vector: Vec<f64>,
    /// Majority value of `v^T x_tilde`.
    pub vote: f64,
    pub vote_fraction: f64,
    pub consensus_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceRecoveryResult {
    pub pivot_set: IndexSet,
    pub complement_vectors: Vec<ComplementVector>,
    /// Span of the recovered `U` and the anchor.
    pub recovered: Subspace,
    /// A point of `mean + U`.
    pub anchor: Vec<f64>,
}

impl SubspaceRecoveryResult {
    /// Estimated `dim U`.
    pub fn rank(&self) -> usize {
        self.pivot_set.len()
    }
}

/// Recovers `Span(U ∪ {mean})` from an `n x d` matrix of corrupted rows.
pub fn recover_subspace(corrupted: &DMatrix<f64>, config: &SubrecConfig) -> Result<SubspaceRecoveryResult, SubrecError> {
    let (n, d) = corrupted.shape();
    if n < 2 {
        return Err(SubrecError::DegenerateSample(format!("need at least two samples, got {n}")));
    }
    if d == 0 {
        return Err(SubrecError::EmptyInput);
    }
    let pairs = n / 2;
    let diffs = DMatrix::from_fn(pairs, d, |r, c| corrupted[(2 * r, c)] - corrupted[(2 * r + 1, c)]);

    let mut pivots: Vec<usize> = Vec::new();
    // (coordinate, weights over the pivots present at that time, consensus)
    let mut relations: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for i in 0..d {
        let cols: Vec<usize> = pivots.iter().cloned().chain(std::iter::once(i)).collect();
        let samples = DMatrix::from_fn(pairs, cols.len(), |r, c| diffs[(r, cols[c])]);
        let out = robust_rank_and_regress(&samples, config, 16 + i as u64)?;
        match out.verdict {
            Verdict::FullRank => pivots.push(i),
            Verdict::Dependent => relations.push((i, out.weights.unwrap_or_default(), out.consensus_fraction)),
        }
    }

    let rows: Vec<Vec<f64>> = rows_of(corrupted);
    let complement_vectors = par::try_map_indexed::<_, SubrecError, _>(relations.len(), config.execution, |r| {
        let (i, ref c, consensus) = relations[r];
        let mut v = vec![0.0; d];
        for (l, &p) in pivots.iter().take(c.len()).enumerate() {
            v[p] = c[l];
        }
        v[i] = -1.0;
        let support: Vec<usize> = (0..d).filter(|&t| v[t] != 0.0).collect();
        let values: Vec<f64> = rows.iter().map(|x| support.iter().map(|&t| v[t] * x[t]).sum()).collect();
        let (vote, vote_fraction) = majority_value(&values, config.vote_tol).ok_or_else(|| {
            let fraction = majority_fraction(&values, config.vote_tol);
            SubrecError::ConsensusFailure { stage: format!("vote for coordinate {}", i + 1), fraction }
        })?;
        Ok(ComplementVector { pivot: i, vector: v, vote, vote_fraction, consensus_fraction: consensus })
    })?;

    // alpha_J = 0, alpha_i = -y_v
    let mut anchor = vec![0.0; d];
    for cv in &complement_vectors {
        anchor[cv.pivot] = -cv.vote;
    }

    // Orthogonal complement of span(V): for pivot p, b_p = e_p plus, at every
    // dependent coordinate i, the weight of p in the relation for i.
    let mut spanning: Vec<Vec<f64>> = pivots
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            let mut b = vec![0.0; d];
            b[p] = 1.0;
            for (i, c, _) in &relations {
                if let Some(w) = c.get(l) {
                    b[*i] = *w;
                }
            }
            b
        })
        .collect();
    if anchor.iter().any(|&a| a != 0.0) {
        spanning.push(anchor.clone());
    }
    if spanning.is_empty() {
        return Err(SubrecError::DegenerateSample("recovered subspace is {0}".into()));
    }
    let recovered = orthonormalize(&spanning)?;
    let pivot_set = IndexSet::from_zero_based(pivots, d)?;
    Ok(SubspaceRecoveryResult { pivot_set, complement_vectors, recovered, anchor })
}

fn majority_fraction(values: &[f64], tol: f64) -> f64 {
    let (v, _, len) = densest_group(values, tol);
    len as f64 / v.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_model, sample_instance, Adversary};
    use crate::subspace::{principal_angle_distance, GaussianModel};

    fn cfg() -> SubrecConfig {
        SubrecConfig { seed: 5, ..SubrecConfig::default() }
    }

    #[test]
    fn regression_with_outliers() {
        let xs = [1.0, -2.0, 0.5, 3.0, -1.5, 2.2, 0.7, -0.3, 1.9, -2.6];
        let mut data: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 2.0 * x]).collect();
        for (r, shift) in [(1, 5.0), (4, -3.0), (8, 0.25)] {
            data[r][1] += shift;
        }
        let m = DMatrix::from_fn(10, 2, |r, c| data[r][c]);
        let out = robust_rank_and_regress(&m, &cfg(), 0).unwrap();
        assert_eq!(out.verdict, Verdict::Dependent);
        assert!((out.weights.as_ref().unwrap()[0] - 2.0).abs() < 1e-9);
        assert!((out.consensus_fraction - 0.7).abs() < 1e-12);

        // every single-row fit, scored exhaustively, finds the same best slope
        let (best_c, best_count) = (0..10)
            .filter(|&r| data[r][0] != 0.0)
            .map(|r| {
                let c = data[r][1] / data[r][0];
                (c, (0..10).filter(|&t| (data[t][1] - c * data[t][0]).abs() <= 1e-9).count())
            })
            .max_by_key(|&(_, n)| n)
            .unwrap();
        assert_eq!(best_count, 7);
        assert!((best_c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn independent_columns_are_full_rank() {
        let model = random_model(&mut rng_for(1, 0), 2, 2, 1.0).unwrap();
        let inst = sample_instance(&model, 200, 0, Adversary::ZeroOut, 3).unwrap();
        let out = robust_rank_and_regress(&inst.clean, &cfg(), 0).unwrap();
        assert_eq!(out.verdict, Verdict::FullRank);
        assert!(out.consensus_fraction < 0.5);
    }

    #[test]
    fn zero_relation() {
        let m = DMatrix::from_fn(20, 2, |r, c| if c == 0 { r as f64 - 7.5 } else { 0.0 });
        let out = robust_rank_and_regress(&m, &cfg(), 0).unwrap();
        assert_eq!(out.verdict, Verdict::Dependent);
        assert!(out.weights.unwrap()[0].abs() < 1e-12);
        assert_eq!(out.consensus_fraction, 1.0);
    }

    #[test]
    fn too_few_rows() {
        let m = DMatrix::from_element(2, 3, 1.0);
        assert!(matches!(robust_rank_and_regress(&m, &cfg(), 0), Err(SubrecError::DegenerateSample(_))));
    }

    #[test]
    fn median_examples() {
        assert_eq!(robust_median(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap(), 3.0);
        assert_eq!(robust_median(&[5.0]).unwrap(), 5.0);
        assert_eq!(robust_median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(robust_median(&[]), Err(SubrecError::EmptyInput));
    }

    #[test]
    fn majority_vote() {
        let v = [1.0, 1.0 + 1e-9, 5.0, 1.0, -3.0];
        let (val, frac) = majority_value(&v, 1e-6).unwrap();
        assert!((val - 1.0).abs() < 1e-8);
        assert!((frac - 0.6).abs() < 1e-12);
        assert!(majority_value(&[1.0, 2.0, 3.0, 1.0], 1e-6).is_none());
    }

    fn axis_instance(mean: Vec<f64>, s: usize, seed: u64) -> crate::gen::ProblemInstance {
        let model = GaussianModel::axis(mean, 2).unwrap();
        sample_instance(&model, 400, s, Adversary::RandomSign { bound: 1.0 }, seed).unwrap()
    }

    #[test]
    fn axis_plane_without_corruption() {
        let inst = axis_instance(vec![0.0; 5], 0, 1);
        let res = recover_subspace(&inst.corrupted, &cfg()).unwrap();
        assert_eq!(res.pivot_set.elements(), &[1, 2]);
        assert_eq!(res.complement_vectors.len(), 3);
        for (cv, i) in res.complement_vectors.iter().zip(2..5) {
            let mut want = vec![0.0; 5];
            want[i] = -1.0;
            assert_eq!(cv.pivot, i);
            assert!(cv.vector.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9));
        }
        assert!(principal_angle_distance(&res.recovered, &Subspace::axis(5, 2)).unwrap() < 1e-9);
    }

    #[test]
    fn mean_outside_plane() {
        let inst = axis_instance(vec![0.0, 0.0, 0.0, 0.0, 7.0], 0, 2);
        let res = recover_subspace(&inst.corrupted, &cfg()).unwrap();
        assert!(res.anchor.iter().zip(&[0.0, 0.0, 0.0, 0.0, 7.0]).all(|(a, b)| (a - b).abs() < 1e-9));
        let want = Subspace::axis(5, 3);
        let mut basis = want.basis().clone();
        basis.swap_rows(2, 4);
        let want = Subspace::from_orthonormal(basis).unwrap();
        assert_eq!(res.recovered.dim(), 3);
        assert!(principal_angle_distance(&res.recovered, &want).unwrap() < 1e-9);
    }

    #[test]
    fn random_model_with_corruption() {
        let mut rng = rng_for(77, 0);
        let base = random_model(&mut rng, 40, 2, 1.0).unwrap();
        let mean: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let model = GaussianModel::new(mean, base.factor().clone()).unwrap();
        let inst = sample_instance(&model, 600, 1, Adversary::RandomSign { bound: 1.0 }, 9).unwrap();
        let res = recover_subspace(&inst.corrupted, &cfg()).unwrap();
        assert_eq!(res.rank(), 2);
        assert!(principal_angle_distance(&res.recovered, &inst.subspace).unwrap() < 1e-6);
        // V restricted to the non-pivot coordinates is -I
        for cv in &res.complement_vectors {
            for t in 0..40 {
                if !res.pivot_set.contains(t + 1) {
                    let want = if t == cv.pivot { -1.0 } else { 0.0 };
                    assert_eq!(cv.vector[t], want);
                }
            }
        }
        assert_eq!(res.pivot_set.len() + res.complement_vectors.len(), 40);
    }

    #[test]
    fn too_few_samples() {
        let m = DMatrix::from_element(1, 4, 1.0);
        assert!(matches!(recover_subspace(&m, &cfg()), Err(SubrecError::DegenerateSample(_))));
    }

    #[test]
    fn execution_modes_agree() {
        let inst = axis_instance(vec![1.0, 0.0, 2.0, 0.0, 3.0], 1, 4);
        let a = recover_subspace(&inst.corrupted, &SubrecConfig { execution: Execution::Sequential, ..cfg() }).unwrap();
        let b = recover_subspace(&inst.corrupted, &SubrecConfig { execution: Execution::Parallel, ..cfg() }).unwrap();
        assert_eq!(a.anchor, b.anchor);
        assert_eq!(a.complement_vectors, b.complement_vectors);
    }
}
