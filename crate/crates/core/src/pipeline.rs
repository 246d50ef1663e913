//! End-to-end recovery of a corrupted data set: subspace recovery, per-coordinate
//! medians, clipping to `[m_j - B0, m_j + B0]`, then Basis Pursuit per row.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{self, BpError};
use crate::par::{self, Execution};
use crate::subrec::{self, SubrecConfig, SubrecError};
use crate::subspace::Subspace;

/// Consistency constant turning a median absolute deviation into a Gaussian
/// standard deviation.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("report has no estimates")]
    EmptyReport,
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Subrec(#[from] SubrecError),
    #[error(transparent)]
    Bp(#[from] BpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanEstimator {
    #[default]
    SampleMean,
    CoordinateMedian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `B0 = multiplier * B * sqrt(ln(n d))`.
    pub truncation_radius_multiplier: f64,
    /// Skips subspace recovery when set.
    pub subspace_override: Option<Subspace>,
    pub mean_estimator: MeanEstimator,
    pub subrec: SubrecConfig,
    pub execution: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            truncation_radius_multiplier: 3.0,
            subspace_override: None,
            mean_estimator: MeanEstimator::SampleMean,
            subrec: SubrecConfig::default(),
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub estimates: DMatrix<f64>,
    pub mean_estimate: Vec<f64>,
    pub subspace_used: Subspace,
    /// Whether `subspace_used` came from subspace recovery.
    pub subspace_recovered: bool,
    pub medians: Vec<f64>,
    /// Coordinate bound used for the radius (given or estimated).
    pub coord_bound: f64,
    pub radius: f64,
    pub clipped_entries: usize,
    /// `||x_hat_i - x_i||_1`, filled by [`RecoveryReport::score`].
    pub per_point_l1: Option<Vec<f64>>,
    pub mean_l1_error: Option<f64>,
}

impl RecoveryReport {
    /// Fills the error fields from ground truth.
    pub fn score(&mut self, clean: &DMatrix<f64>, true_mean: &[f64]) -> Result<(), PipelineError> {
        if clean.shape() != self.estimates.shape() {
            return Err(PipelineError::DimensionMismatch { expected: self.estimates.ncols(), got: clean.ncols() });
        }
        let per_point = (0..clean.nrows())
            .map(|r| (0..clean.ncols()).map(|c| (self.estimates[(r, c)] - clean[(r, c)]).abs()).sum())
            .collect();
        self.per_point_l1 = Some(per_point);
        self.mean_l1_error = Some(bp::l1_distance(&self.mean_estimate, true_mean));
        Ok(())
    }

    pub fn mean_error(&self) -> Option<f64> {
        self.per_point_l1.as_ref().map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64)
    }

    pub fn max_error(&self) -> Option<f64> {
        self.per_point_l1.as_ref().map(|v| v.iter().cloned().fold(0.0, f64::max))
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            n: self.estimates.nrows(),
            d: self.estimates.ncols(),
            subspace_dim: self.subspace_used.dim(),
            subspace_recovered: self.subspace_recovered,
            coord_bound: self.coord_bound,
            radius: self.radius,
            clipped_entries: self.clipped_entries,
            mean_estimate: self.mean_estimate.clone(),
            mean_error: self.mean_error(),
            max_error: self.max_error(),
            mean_l1_error: self.mean_l1_error,
            per_point_l1: self.per_point_l1.clone(),
        }
    }
}

/// Scalar part of a [`RecoveryReport`], for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub n: usize,
    pub d: usize,
    pub subspace_dim: usize,
    pub subspace_recovered: bool,
    pub coord_bound: f64,
    pub radius: f64,
    pub clipped_entries: usize,
    pub mean_estimate: Vec<f64>,
    pub mean_error: Option<f64>,
    pub max_error: Option<f64>,
    pub mean_l1_error: Option<f64>,
    pub per_point_l1: Option<Vec<f64>>,
}

fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().cloned().collect()
}

/// `max_j 1.4826 * MAD_j`.
pub fn mad_coord_bound(corrupted: &DMatrix<f64>) -> Result<f64, PipelineError> {
    let mut best: f64 = 0.0;
    for j in 0..corrupted.ncols() {
        let col = column(corrupted, j);
        let med = subrec::robust_median(&col)?;
        let dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
        best = best.max(MAD_SCALE * subrec::robust_median(&dev)?);
    }
    Ok(best)
}

/// `multiplier * b * sqrt(ln(n d))`.
pub fn truncation_radius(multiplier: f64, b: f64, n: usize, d: usize) -> f64 {
    multiplier * b * ((n * d) as f64).ln().max(0.0).sqrt()
}

/// Recovers every row of `corrupted`. `coord_bound` is `B`; `None` estimates
/// it from the data with [`mad_coord_bound`].
pub fn recover_dataset(
    corrupted: &DMatrix<f64>,
    config: &PipelineConfig,
    coord_bound: Option<f64>,
) -> Result<RecoveryReport, PipelineError> {
    let (n, d) = corrupted.shape();
    if !(config.truncation_radius_multiplier > 0.0) {
        return Err(PipelineError::InvalidConfig("truncation multiplier must be positive".into()));
    }
    if n == 0 || d == 0 {
        return Err(PipelineError::EmptyReport);
    }
    if let Some(b) = coord_bound {
        if !(b.is_finite() && b >= 0.0) {
            return Err(PipelineError::InvalidConfig(format!("coordinate bound must be finite and non-negative, got {b}")));
        }
    }

    let (subspace, recovered) = match &config.subspace_override {
        Some(u) => {
            if u.ambient_dim() != d {
                return Err(PipelineError::DimensionMismatch { expected: d, got: u.ambient_dim() });
            }
            (u.clone(), false)
        }
        None => (subrec::recover_subspace(corrupted, &config.subrec)?.recovered, true),
    };

    let b = match coord_bound {
        Some(b) => b,
        None => mad_coord_bound(corrupted)?,
    };
    let radius = truncation_radius(config.truncation_radius_multiplier, b, n, d);
    let medians = (0..d).map(|j| subrec::robust_median(&column(corrupted, j))).collect::<Result<Vec<_>, _>>()?;
    let mut clipped = corrupted.clone();
    let mut clipped_entries = 0;
    for j in 0..d {
        let (lo, hi) = (medians[j] - radius, medians[j] + radius);
        for r in 0..n {
            let v = clipped[(r, j)];
            let c = v.clamp(lo, hi);
            if c != v {
                clipped[(r, j)] = c;
                clipped_entries += 1;
            }
        }
    }

    let rows = par::try_map_indexed::<_, BpError, _>(n, config.execution, |r| {
        let row: Vec<f64> = clipped.row(r).iter().cloned().collect();
        Ok(bp::recover(&subspace, &row)?.estimate)
    })?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let estimates = DMatrix::from_row_slice(n, d, &flat);

    let mean_estimate = match config.mean_estimator {
        MeanEstimator::SampleMean => sample_mean(&estimates)?,
        MeanEstimator::CoordinateMedian => {
            (0..d).map(|j| subrec::robust_median(&column(&estimates, j))).collect::<Result<Vec<_>, _>>()?
        }
    };

    Ok(RecoveryReport {
        estimates,
        mean_estimate,
        subspace_used: subspace,
        subspace_recovered: recovered,
        medians,
        coord_bound: b,
        radius,
        clipped_entries,
        per_point_l1: None,
        mean_l1_error: None,
    })
}

fn sample_mean(m: &DMatrix<f64>) -> Result<Vec<f64>, PipelineError> {
    if m.nrows() == 0 {
        return Err(PipelineError::EmptyReport);
    }
    Ok((0..m.ncols()).map(|j| m.column(j).sum() / m.nrows() as f64).collect())
}

/// Coordinate-wise mean of the recovered rows.
pub fn estimate_mean(report: &RecoveryReport) -> Result<Vec<f64>, PipelineError> {
    sample_mean(&report.estimates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_model, rng_for, sample_instance, Adversary};
    use crate::subspace::GaussianModel;

    fn with_override(u: Subspace) -> PipelineConfig {
        PipelineConfig { subspace_override: Some(u), ..PipelineConfig::default() }
    }

    #[test]
    fn clean_data_is_returned() {
        let model = random_model(&mut rng_for(3, 0), 20, 3, 1.0).unwrap();
        let inst = sample_instance(&model, 50, 0, Adversary::ZeroOut, 8).unwrap();
        let rep = recover_dataset(&inst.corrupted, &with_override(inst.subspace.clone()), Some(1.0)).unwrap();
        assert_eq!(rep.clipped_entries, 0);
        assert!((&rep.estimates - &inst.clean).amax() < 1e-7);
        let mut rep = rep;
        rep.score(&inst.clean, model.mean()).unwrap();
        assert!(rep.max_error().unwrap() < 1e-6);
    }

    #[test]
    fn recovered_subspace_path() {
        let model = random_model(&mut rng_for(4, 0), 30, 2, 1.0).unwrap();
        let inst = sample_instance(&model, 400, 1, Adversary::RandomSign { bound: 1.0 }, 1).unwrap();
        let mut rep = recover_dataset(&inst.corrupted, &PipelineConfig::default(), Some(1.0)).unwrap();
        assert!(rep.subspace_recovered);
        assert_eq!(rep.subspace_used.dim(), 2);
        rep.score(&inst.clean, model.mean()).unwrap();
        for r in 0..inst.n() {
            let row: Vec<f64> = rep.estimates.row(r).iter().cloned().collect();
            assert!(rep.subspace_used.residual_norm(&row).unwrap() < 1e-7);
        }
        assert!(rep.mean_error().unwrap() < 1.0);
    }

    #[test]
    fn spikes_are_clipped() {
        let model = GaussianModel::axis(vec![0.0; 10], 2).unwrap();
        let inst = sample_instance(&model, 100, 2, Adversary::LargeSpike { magnitude: 1e9 }, 2).unwrap();
        let mut rep = recover_dataset(&inst.corrupted, &with_override(inst.subspace.clone()), Some(1.0)).unwrap();
        assert_eq!(rep.clipped_entries, 200);
        rep.score(&inst.clean, model.mean()).unwrap();
        assert!(rep.max_error().unwrap() <= 2.0 * (rep.radius + 1.0) * 2.0);
    }

    #[test]
    fn mean_estimators() {
        let model = GaussianModel::axis(vec![1.0, -2.0, 0.5], 3).unwrap();
        let inst = sample_instance(&model, 9, 0, Adversary::ZeroOut, 0).unwrap();
        let rep = recover_dataset(&inst.corrupted, &with_override(Subspace::axis(3, 3)), Some(1.0)).unwrap();
        assert_eq!(estimate_mean(&rep).unwrap(), rep.mean_estimate);
        let cfg = PipelineConfig { mean_estimator: MeanEstimator::CoordinateMedian, ..with_override(Subspace::axis(3, 3)) };
        let med = recover_dataset(&inst.corrupted, &cfg, Some(1.0)).unwrap();
        assert_eq!(med.mean_estimate, med.medians);
    }

    #[test]
    fn single_row_mean() {
        let u = Subspace::axis(2, 2);
        let x = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let rep = recover_dataset(&x, &with_override(u), Some(1.0)).unwrap();
        assert_eq!(estimate_mean(&rep).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn mad_scale_tracks_coordinate_bound() {
        let model = random_model(&mut rng_for(6, 0), 5, 5, 2.0).unwrap();
        let inst = sample_instance(&model, 4000, 0, Adversary::ZeroOut, 6).unwrap();
        let est = mad_coord_bound(&inst.corrupted).unwrap();
        assert!((est - 2.0).abs() < 0.15, "{est}");
    }

    #[test]
    fn config_validation() {
        let x = DMatrix::from_element(2, 2, 1.0);
        let bad = PipelineConfig { truncation_radius_multiplier: 0.0, ..with_override(Subspace::axis(2, 1)) };
        assert!(matches!(recover_dataset(&x, &bad, Some(1.0)), Err(PipelineError::InvalidConfig(_))));
        assert!(matches!(
            recover_dataset(&x, &with_override(Subspace::axis(3, 1)), Some(1.0)),
            Err(PipelineError::DimensionMismatch { .. })
        ));
    }
}
