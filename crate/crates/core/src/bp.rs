//! Basis Pursuit: `min ||x_hat - x_tilde||_1` over `x_hat` in a subspace.
//!
//! [`recover`] solves the LP dual `max x_tilde^T y  s.t.  U^T y = 0, -1 <= y <= 1`
//! (k equality rows, d bounded variables) and reads the primal optimum off the
//! row multipliers. [`recover_primal`] solves the direct coefficient/slack
//! encoding and is kept as an independent route.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus};
use crate::subspace::Subspace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BpError {
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("locations and weights differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("weights must be positive and finite")]
    InvalidWeight,
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("basis pursuit LP reported {0:?}; this encoding is always feasible and bounded")]
    Internal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpResult {
    pub estimate: Vec<f64>,
    /// `||estimate - corrupted||_1`
    pub objective: f64,
    /// `||estimate - clean||_1`, filled by [`BpResult::with_truth`].
    pub l1_error: Option<f64>,
}

impl BpResult {
    fn new(estimate: Vec<f64>, corrupted: &[f64]) -> Self {
        let objective = l1_distance(&estimate, corrupted);
        Self { estimate, objective, l1_error: None }
    }

    pub fn with_truth(mut self, clean: &[f64]) -> Self {
        self.l1_error = Some(l1_distance(&self.estimate, clean));
        self
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn check_len(u: &Subspace, v: &[f64]) -> Result<(), BpError> {
    if v.len() != u.ambient_dim() {
        return Err(BpError::DimensionMismatch { expected: u.ambient_dim(), got: v.len() });
    }
    Ok(())
}

/// Basis Pursuit estimate of `corrupted` in `u`.
pub fn recover(u: &Subspace, corrupted: &[f64]) -> Result<BpResult, BpError> {
    check_len(u, corrupted)?;
    let d = u.ambient_dim();
    let basis = u.basis();
    let program = LinearProgram::new(
        corrupted.iter().map(|v| -v).collect(),
        basis.transpose(),
        vec![0.0; u.dim()],
        vec![-1.0; d],
        vec![1.0; d],
    )?;
    let sol = lp::solve(&program)?;
    if sol.status != LpStatus::Optimal {
        return Err(BpError::Internal(sol.status));
    }
    // x* = U z with z = -duals
    let z = DVector::from_iterator(u.dim(), sol.duals.iter().map(|p| -p));
    let estimate = (basis * z).as_slice().to_vec();
    Ok(BpResult::new(estimate, corrupted))
}

/// Same optimum via `U z - p + q = x_tilde`, `p, q >= 0`, minimizing `sum(p + q)`.
pub fn recover_primal(u: &Subspace, corrupted: &[f64]) -> Result<BpResult, BpError> {
    check_len(u, corrupted)?;
    let (d, k) = (u.ambient_dim(), u.dim());
    let n = k + 2 * d;
    let mut e = DMatrix::zeros(d, n);
    e.view_mut((0, 0), (d, k)).copy_from(u.basis());
    for i in 0..d {
        e[(i, k + i)] = -1.0;
        e[(i, k + d + i)] = 1.0;
    }
    let mut c = vec![0.0; n];
    c[k..].iter_mut().for_each(|v| *v = 1.0);
    let mut lower = vec![0.0; n];
    lower[..k].iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
    let program = LinearProgram::new(c, e, corrupted.to_vec(), lower, vec![f64::INFINITY; n])?;
    let sol = lp::solve(&program)?;
    if sol.status != LpStatus::Optimal {
        return Err(BpError::Internal(sol.status));
    }
    let estimate = u.embed(&sol.point[..k]).as_slice().to_vec();
    Ok(BpResult::new(estimate, corrupted))
}

/// Minimizer of `sum_i w_i |alpha - loc_i|`; the left endpoint when the
/// minimizing set is an interval.
pub fn weighted_median(locations: &[f64], weights: &[f64]) -> Result<f64, BpError> {
    if locations.len() != weights.len() {
        return Err(BpError::LengthMismatch(locations.len(), weights.len()));
    }
    if locations.is_empty() {
        return Err(BpError::EmptyInput);
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(BpError::InvalidWeight);
    }
    let mut order: Vec<usize> = (0..locations.len()).collect();
    order.sort_by(|&a, &b| locations[a].total_cmp(&locations[b]));
    let total: f64 = weights.iter().sum();
    let half = 0.5 * total;
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= half * (1.0 - 1e-12) {
            return Ok(locations[i]);
        }
    }
    Ok(locations[*order.last().unwrap()])
}

/// One-dimensional Basis Pursuit along `direction` via a weighted median.
pub fn recover_1d(direction: &[f64], corrupted: &[f64]) -> Result<BpResult, BpError> {
    if direction.len() != corrupted.len() {
        return Err(BpError::DimensionMismatch { expected: direction.len(), got: corrupted.len() });
    }
    let (locs, weights): (Vec<f64>, Vec<f64>) = direction
        .iter()
        .zip(corrupted)
        .filter(|(u, _)| **u != 0.0)
        .map(|(u, x)| (x / u, u.abs()))
        .unzip();
    if locs.is_empty() {
        return Err(BpError::ZeroDirection);
    }
    let alpha = weighted_median(&locs, &weights)?;
    let estimate = direction.iter().map(|u| alpha * u).collect();
    Ok(BpResult::new(estimate, corrupted))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    pub bound_factorial: f64,
    pub bound_uniform: f64,
    /// `None` when `2 s^2 > d`.
    pub bound_geometric: Option<f64>,
    pub minimum: f64,
}

/// Upper bounds on `P(||x* - x||_1 >= t)` over a uniformly random size-`s`
/// support, for unit coordinate bound.
pub fn tail_bounds(k: usize, s: usize, d: usize, t: f64) -> TailBounds {
    let (kf, sf, df) = (k as f64, s as f64, d as f64);
    let m = (t / 4.0).floor() as u64 + 1;
    let base = 12.0 * sf * sf * kf / df;
    let bound_factorial = (1..=m).fold(1.0, |acc, i| acc * base / i as f64);
    let bound_uniform = 24.0 * kf * sf / df;
    let bound_geometric = (2 * s * s <= d).then(|| {
        let exp = 1 + (t / (48.0 * kf)).floor() as i32;
        12.0 * kf * (2.0 * sf / df).powi(exp)
    });
    let minimum = bound_factorial.min(bound_uniform).min(bound_geometric.unwrap_or(f64::INFINITY)).min(1.0);
    TailBounds { bound_factorial, bound_uniform, bound_geometric, minimum }
}

/// Smallest integer `t0 >= 1` with `12 e k s^2 / (d t0) <= 1/2` and `2^-t0 <= 1/d`.
pub fn expected_error_t0(k: usize, s: usize, d: usize) -> u32 {
    let density = (24.0 * std::f64::consts::E * (k * s * s) as f64 / d as f64).ceil() as u32;
    let log2_d = usize::BITS - d.saturating_sub(1).leading_zeros();
    density.max(log2_d).max(1)
}

/// Finite-form bound on `E ||x* - x||_1` at coordinate bound `b`:
/// `b (t0 * 96 k s / d + 8 * 2^-t0)`.
pub fn expected_error_bound(k: usize, s: usize, d: usize, b: f64) -> f64 {
    let t0 = expected_error_t0(k, s, d);
    b * (t0 as f64 * 96.0 * (k * s) as f64 / d as f64 + 8.0 * 0.5f64.powi(t0 as i32))
}
