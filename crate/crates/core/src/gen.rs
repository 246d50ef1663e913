//! Synthetic instances: low-rank Gaussian rows, uniform corruption supports,
//! and pluggable adversaries.
//!
//! Randomness comes from `ChaCha8Rng` seeded with the instance seed. Clean
//! rows, supports and adversary draws use separate streams of that generator,
//! so two instances that differ only in the adversary share clean data and
//! supports exactly. Gaussians use `rand_distr::StandardNormal` (ziggurat).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subspace::{orthonormalize_columns, GaussianModel, IndexSet, LinalgError, Subspace};

const STREAM_CLEAN: u64 = 0;
const STREAM_SUPPORT: u64 = 1;
const STREAM_ADVERSARY: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("support size {s} exceeds dimension {d}")]
    SupportTooLarge { s: usize, d: usize },
    #[error("need at least one sample")]
    NoSamples,
    #[error("expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid adversary: {0}")]
    InvalidAdversary(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Adversary {
    /// Corrupted entries become 0.
    ZeroOut,
    /// `x_i + bound * xi` with an independent fair sign `xi`.
    RandomSign { bound: f64 },
    /// `x_i + bound * sgn(u_i)` along the first basis direction `u` of the
    /// model, `sgn(0) = +1`.
    WorstCase1D { bound: f64 },
    /// `x_i + magnitude * xi`; unbounded relative to the data scale.
    LargeSpike { magnitude: f64 },
}

impl Adversary {
    /// Largest possible `|x_tilde_i - x_i|`, if bounded independently of `x`.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            Adversary::RandomSign { bound } | Adversary::WorstCase1D { bound } => Some(bound),
            Adversary::ZeroOut | Adversary::LargeSpike { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        let v = match *self {
            Adversary::ZeroOut => return Ok(()),
            Adversary::RandomSign { bound } | Adversary::WorstCase1D { bound } => bound,
            Adversary::LargeSpike { magnitude } => magnitude,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(GenError::InvalidAdversary(format!("parameter must be finite and non-negative, got {v}")))
        }
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adversary::ZeroOut => write!(f, "zero-out"),
            Adversary::RandomSign { bound } => write!(f, "random-sign:{bound}"),
            Adversary::WorstCase1D { bound } => write!(f, "worst-case-1d:{bound}"),
            Adversary::LargeSpike { magnitude } => write!(f, "large-spike:{magnitude}"),
        }
    }
}

/// Parses `zero-out`, `random-sign[:B]`, `worst-case-1d[:B]`, `large-spike[:M]`.
/// A missing parameter defaults to 1 (1e9 for spikes).
impl FromStr for Adversary {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let value = |default: f64| -> Result<f64, GenError> {
            match param {
                None => Ok(default),
                Some(p) => p.trim().parse().map_err(|_| GenError::InvalidAdversary(s.to_string())),
            }
        };
        let adv = match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "zero-out" | "zero" => Adversary::ZeroOut,
            "random-sign" => Adversary::RandomSign { bound: value(1.0)? },
            "worst-case-1d" => Adversary::WorstCase1D { bound: value(1.0)? },
            "large-spike" | "spike" => Adversary::LargeSpike { magnitude: value(1e9)? },
            _ => return Err(GenError::InvalidAdversary(s.to_string())),
        };
        adv.validate()?;
        Ok(adv)
    }
}

/// Rows of a generated data set together with everything needed to score a
/// recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub model: GaussianModel,
    /// `Span(U ∪ {mean})`; just `U` for centered models.
    pub subspace: Subspace,
    pub clean: DMatrix<f64>,
    pub supports: Vec<IndexSet>,
    pub corrupted: DMatrix<f64>,
    pub adversary: Adversary,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.clean.nrows()
    }

    pub fn d(&self) -> usize {
        self.clean.ncols()
    }

    pub fn s(&self) -> usize {
        self.supports.first().map_or(0, IndexSet::len)
    }

    pub fn clean_row(&self, i: usize) -> Vec<f64> {
        self.clean.row(i).iter().cloned().collect()
    }

    pub fn corrupted_row(&self, i: usize) -> Vec<f64> {
        self.corrupted.row(i).iter().cloned().collect()
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of trial `trial` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

/// Uniform size-`s` subset of `[d]` from the first `s` steps of a Fisher–Yates
/// shuffle.
pub fn sample_support<R: Rng + ?Sized>(rng: &mut R, d: usize, s: usize) -> IndexSet {
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..s.min(d) {
        let j = rng.random_range(i..d);
        idx.swap(i, j);
    }
    idx.truncate(s.min(d));
    IndexSet::from_zero_based(idx, d).expect("distinct indices in range")
}

/// Orthonormal basis of a uniformly random `k`-dimensional subspace.
pub fn random_subspace<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Subspace {
    let g = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    orthonormalize_columns(&g).expect("Gaussian matrix has full rank almost surely")
}

/// Centered model with i.i.d. Gaussian factor, rescaled to coordinate bound `b`.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize, b: f64) -> Result<GaussianModel, GenError> {
    let factor = DMatrix::from_fn(k, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(GaussianModel::new(vec![0.0; d], factor)?.rescaled(b))
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `x` with every coordinate in `support` shifted by `b * sgn(u_i)`.
pub fn worst_case_1d_corrupt(u: &[f64], x: &[f64], support: &IndexSet, b: f64) -> Result<Vec<f64>, GenError> {
    if u.len() != x.len() {
        return Err(GenError::DimensionMismatch { expected: x.len(), got: u.len() });
    }
    if support.universe() != x.len() {
        return Err(GenError::DimensionMismatch { expected: x.len(), got: support.universe() });
    }
    let mut out = x.to_vec();
    for i in support.zero_based() {
        out[i] += b * sgn(u[i]);
    }
    Ok(out)
}

fn first_direction(model: &GaussianModel) -> Vec<f64> {
    let u = model.subspace();
    let col: Vec<f64> = u.basis().column(0).iter().cloned().collect();
    let norm: f64 = col.iter().map(|v| v.abs()).sum();
    col.into_iter().map(|v| v / norm).collect()
}

/// Draws `n` rows `mean + A^T g`, a uniform size-`s` support per row, and
/// applies `adversary` on each support. Deterministic in `seed`.
pub fn sample_instance(
    model: &GaussianModel,
    n: usize,
    s: usize,
    adversary: Adversary,
    seed: u64,
) -> Result<ProblemInstance, GenError> {
    let d = model.ambient_dim();
    let k = model.rank();
    if n == 0 {
        return Err(GenError::NoSamples);
    }
    if s > d {
        return Err(GenError::SupportTooLarge { s, d });
    }
    adversary.validate()?;

    let mut clean_rng = rng_for(seed, STREAM_CLEAN);
    let mut support_rng = rng_for(seed, STREAM_SUPPORT);
    let mut adv_rng = rng_for(seed, STREAM_ADVERSARY);

    let factor = model.factor();
    let mean = model.mean();
    let mut clean = DMatrix::zeros(n, d);
    let mut g = vec![0.0; k];
    for r in 0..n {
        for v in g.iter_mut() {
            *v = clean_rng.sample(StandardNormal);
        }
        for j in 0..d {
            let mut acc = mean[j];
            for (l, gl) in g.iter().enumerate() {
                acc += factor[(l, j)] * gl;
            }
            clean[(r, j)] = acc;
        }
    }

    let direction = matches!(adversary, Adversary::WorstCase1D { .. }).then(|| first_direction(model));
    let mut corrupted = clean.clone();
    let mut supports = Vec::with_capacity(n);
    for r in 0..n {
        let support = sample_support(&mut support_rng, d, s);
        for j in support.zero_based() {
            // one sign per corrupted entry for every adversary keeps streams aligned
            let xi = if adv_rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x = clean[(r, j)];
            corrupted[(r, j)] = match adversary {
                Adversary::ZeroOut => 0.0,
                Adversary::RandomSign { bound } => x + bound * xi,
                Adversary::WorstCase1D { bound } => x + bound * sgn(direction.as_ref().unwrap()[j]),
                Adversary::LargeSpike { magnitude } => x + magnitude * xi,
            };
        }
        supports.push(support);
    }

    let subspace = if mean.iter().all(|&m| m == 0.0) { model.subspace() } else { model.subspace_with_mean() };
    Ok(ProblemInstance { model: model.clone(), subspace, clean, supports, corrupted, adversary, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(d: usize, k: usize, seed: u64) -> GaussianModel {
        random_model(&mut rng_for(seed, 9), d, k, 1.0).unwrap()
    }

    #[test]
    fn zero_support_is_clean() {
        let inst = sample_instance(&model(8, 2, 1), 5, 0, Adversary::RandomSign { bound: 1.0 }, 7).unwrap();
        assert_eq!(inst.clean, inst.corrupted);
        assert!(inst.supports.iter().all(IndexSet::is_empty));
    }

    #[test]
    fn zero_out_adversary() {
        let inst = sample_instance(&model(10, 2, 1), 20, 3, Adversary::ZeroOut, 4).unwrap();
        for (r, sup) in inst.supports.iter().enumerate() {
            assert_eq!(sup.len(), 3);
            for j in 0..10 {
                if sup.contains(j + 1) {
                    assert_eq!(inst.corrupted[(r, j)], 0.0);
                } else {
                    assert_eq!(inst.corrupted[(r, j)], inst.clean[(r, j)]);
                }
            }
        }
    }

    #[test]
    fn bounded_adversaries_respect_bound() {
        let m = model(12, 3, 2);
        for adv in [Adversary::RandomSign { bound: 0.7 }, Adversary::WorstCase1D { bound: 0.7 }] {
            let inst = sample_instance(&m, 30, 4, adv, 5).unwrap();
            let diff = (&inst.corrupted - &inst.clean).amax();
            assert!(diff <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn deterministic_and_paired() {
        let m = model(15, 2, 3);
        let a = sample_instance(&m, 10, 3, Adversary::RandomSign { bound: 1.0 }, 99).unwrap();
        let b = sample_instance(&m, 10, 3, Adversary::RandomSign { bound: 1.0 }, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_instance(&m, 10, 3, Adversary::LargeSpike { magnitude: 1e9 }, 99).unwrap();
        assert_eq!(a.clean, c.clean);
        assert_eq!(a.supports, c.supports);
        // same signs: spike = clean + 1e9 * (bounded - clean)
        for r in 0..10 {
            for j in a.supports[r].zero_based() {
                let sa = (a.corrupted[(r, j)] - a.clean[(r, j)]).signum();
                let sc = (c.corrupted[(r, j)] - c.clean[(r, j)]).signum();
                assert_eq!(sa, sc);
            }
        }
    }

    #[test]
    fn clean_rows_lie_in_span() {
        let mut mean = vec![0.0; 9];
        mean[8] = 4.0;
        let m = GaussianModel::new(mean, model(9, 2, 8).factor().clone()).unwrap();
        let inst = sample_instance(&m, 25, 2, Adversary::ZeroOut, 1).unwrap();
        assert_eq!(inst.subspace.dim(), 3);
        for r in 0..25 {
            assert!(inst.subspace.residual_norm(&inst.clean_row(r)).unwrap() < 1e-8);
        }
    }

    #[test]
    fn worst_case_examples() {
        let s1 = IndexSet::new(vec![1], 2).unwrap();
        assert_eq!(worst_case_1d_corrupt(&[1.0, 0.0], &[0.0, 0.0], &s1, 1.0).unwrap(), vec![1.0, 0.0]);
        let s12 = IndexSet::new(vec![1, 2], 2).unwrap();
        assert_eq!(worst_case_1d_corrupt(&[-0.5, 0.5], &[0.0, 0.0], &s12, 2.0).unwrap(), vec![-2.0, 2.0]);
        assert_eq!(worst_case_1d_corrupt(&[0.0, 0.0], &[0.0, 0.0], &s12, 1.0).unwrap(), vec![1.0, 1.0]);
        assert!(worst_case_1d_corrupt(&[1.0], &[0.0, 0.0], &s12, 1.0).is_err());
    }

    #[test]
    fn worst_case_drives_one_dimensional_error() {
        // S = {1} carries more than half the mass of u, so the adversary moves BP
        let u = [0.6, 0.2, 0.2];
        let s = IndexSet::new(vec![1], 3).unwrap();
        let xt = worst_case_1d_corrupt(&u, &[0.0; 3], &s, 1.0).unwrap();
        let r = crate::bp::recover_1d(&u, &xt).unwrap().with_truth(&[0.0; 3]);
        assert!(r.l1_error.unwrap() > 0.0);
    }

    #[test]
    fn adversary_parsing() {
        assert_eq!("zero-out".parse::<Adversary>().unwrap(), Adversary::ZeroOut);
        assert_eq!("random-sign:2.5".parse::<Adversary>().unwrap(), Adversary::RandomSign { bound: 2.5 });
        assert_eq!("worst_case_1d".parse::<Adversary>().unwrap(), Adversary::WorstCase1D { bound: 1.0 });
        assert_eq!("large-spike".parse::<Adversary>().unwrap(), Adversary::LargeSpike { magnitude: 1e9 });
        assert!("random-sign:-1".parse::<Adversary>().is_err());
        assert!("bogus".parse::<Adversary>().is_err());
        for a in [Adversary::ZeroOut, Adversary::RandomSign { bound: 0.5 }, Adversary::LargeSpike { magnitude: 3.0 }] {
            assert_eq!(a.to_string().parse::<Adversary>().unwrap(), a);
        }
    }

    #[test]
    fn support_marginals_are_uniform() {
        let (d, s, trials) = (30usize, 3usize, 20_000usize);
        let mut rng = rng_for(5, STREAM_SUPPORT);
        let mut counts = vec![0usize; d];
        for _ in 0..trials {
            let sup = sample_support(&mut rng, d, s);
            assert_eq!(sup.len(), s);
            for j in sup.zero_based() {
                counts[j] += 1;
            }
        }
        let p = s as f64 / d as f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() <= 4.0 * sd);
        }
    }

    #[test]
    fn errors() {
        let m = model(5, 1, 0);
        assert_eq!(sample_instance(&m, 0, 1, Adversary::ZeroOut, 0), Err(GenError::NoSamples));
        assert_eq!(sample_instance(&m, 1, 6, Adversary::ZeroOut, 0), Err(GenError::SupportTooLarge { s: 6, d: 5 }));
    }
}
