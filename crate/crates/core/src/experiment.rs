//! Seeded Monte Carlo runners. Trial `i` of a run seeded with `seed` uses
//! [`trial_seed`]`(seed, i)`, so every record can be replayed on its own, and
//! records come back in trial order whatever the execution mode.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{self, tail_bounds, BpError, TailBounds};
use crate::gen::{random_model, rng_for, sample_instance, trial_seed, Adversary, GenError};
use crate::par::{self, Execution};
use crate::pipeline::{recover_dataset, PipelineConfig, PipelineError};
use crate::subrec::{recover_subspace, SubrecConfig, SubrecError};
use crate::subspace::{principal_angle_distance, GaussianModel, LinalgError};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Distance below which a recovered subspace counts as exact.
pub const SUBSPACE_MATCH_TOL: f64 = 1e-6;

const STREAM_MODEL: u64 = 3;
const STREAM_MEAN: u64 = 4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Bp(#[from] BpError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Subrec(#[from] SubrecError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// `P(S ∩ [k] = ∅)` for uniform `S` of size `s` in `[d]`:
/// `prod_{i<s} (d-k-i)/(d-i)`.
pub fn axis_miss_probability(d: usize, k: usize, s: usize) -> f64 {
    if s + k > d {
        return 0.0;
    }
    (0..s).map(|i| (d - k - i) as f64 / (d - i) as f64).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceKind {
    #[default]
    Random,
    Axis,
}

impl std::str::FromStr for SubspaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SubspaceKind::Random),
            "axis" => Ok(SubspaceKind::Axis),
            _ => Err(format!("unknown subspace kind {s:?} (expected random or axis)")),
        }
    }
}

/// One row per trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub trial: u64,
    pub seed: u64,
    /// Single-point error (bp-tail) or mean per-point error (pipeline).
    pub error: Option<f64>,
    pub max_error: Option<f64>,
    pub mean_estimate_error: Option<f64>,
    pub subspace_distance: Option<f64>,
    pub failure: Option<String>,
    /// Excluded from determinism comparisons.
    pub micros: u64,
}

impl ExperimentRecord {
    /// Equality ignoring timing.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { micros: 0, ..self.clone() } == Self { micros: 0, ..other.clone() }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ExperimentError> {
    if cond {
        Ok(())
    } else {
        Err(ExperimentError::InvalidConfig(msg()))
    }
}

fn check_dims(d: usize, k: usize, s: usize, trials: u64) -> Result<(), ExperimentError> {
    check(d >= 1, || "d must be positive".into())?;
    check((1..=d).contains(&k), || format!("need 1 <= k <= d, got k={k}, d={d}"))?;
    check(s <= d, || format!("need s <= d, got s={s}, d={d}"))?;
    check(trials >= 1, || "trials must be positive".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpTailConfig {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    /// Coordinate bound of the model.
    pub b: f64,
    pub adversary: Adversary,
    pub subspace: SubspaceKind,
    pub trials: u64,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub execution: Execution,
}

impl Default for BpTailConfig {
    fn default() -> Self {
        Self {
            d: 600,
            k: 2,
            s: 3,
            b: 1.0,
            adversary: Adversary::RandomSign { bound: 1.0 },
            subspace: SubspaceKind::Random,
            trials: 1000,
            seed: 0,
            t_grid: vec![0.01, 1.0, 4.0, 8.0],
            execution: Execution::Parallel,
        }
    }
}

impl BpTailConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        check_dims(self.d, self.k, self.s, self.trials)?;
        check(self.b.is_finite() && self.b > 0.0, || format!("B must be positive, got {}", self.b))?;
        check(self.t_grid.iter().all(|t| t.is_finite() && *t >= 0.0), || "t grid must be finite and non-negative".into())
    }

    /// The run's fixed model.
    pub fn model(&self) -> Result<GaussianModel, ExperimentError> {
        Ok(match self.subspace {
            SubspaceKind::Axis => GaussianModel::axis(vec![0.0; self.d], self.k)?.rescaled(self.b),
            SubspaceKind::Random => random_model(&mut rng_for(self.seed, STREAM_MODEL), self.d, self.k, self.b)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub trials: u64,
    pub exceed: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub bounds: TailBounds,
}

/// Empirical `P(error >= t)` for each `t`, with the matching tail bounds.
pub fn summarize_tail(errors: &[f64], t_grid: &[f64], k: usize, s: usize, d: usize) -> Vec<TailRow> {
    let n = errors.len() as u64;
    t_grid
        .iter()
        .map(|&t| {
            let exceed = errors.iter().filter(|&&e| e >= t).count() as u64;
            let (wilson_lo, wilson_hi) = wilson_interval(exceed, n, Z95);
            TailRow {
                t,
                trials: n,
                exceed,
                p_hat: if n == 0 { 0.0 } else { exceed as f64 / n as f64 },
                wilson_lo,
                wilson_hi,
                bounds: tail_bounds(k, s, d, t),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpTailResult {
    pub records: Vec<ExperimentRecord>,
    pub rows: Vec<TailRow>,
    pub mean_error: f64,
}

impl BpTailResult {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error.unwrap_or(f64::NAN)).collect()
    }
}

/// One BP recovery per trial against a model fixed for the whole run.
pub fn run_bp_tail(cfg: &BpTailConfig) -> Result<BpTailResult, ExperimentError> {
    cfg.validate()?;
    let model = cfg.model()?;
    let records = par::try_map_indexed::<_, ExperimentError, _>(cfg.trials as usize, cfg.execution, |i| {
        let start = Instant::now();
        let seed = trial_seed(cfg.seed, i as u64);
        let inst = sample_instance(&model, 1, cfg.s, cfg.adversary, seed)?;
        let out = bp::recover(&inst.subspace, &inst.corrupted_row(0))?.with_truth(&inst.clean_row(0));
        Ok(ExperimentRecord {
            trial: i as u64,
            seed,
            error: out.l1_error,
            micros: start.elapsed().as_micros() as u64,
            ..Default::default()
        })
    })?;
    let errors: Vec<f64> = records.iter().map(|r| r.error.unwrap_or(f64::NAN)).collect();
    let rows = summarize_tail(&errors, &cfg.t_grid, cfg.k, cfg.s, cfg.d);
    let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(BpTailResult { records, rows, mean_error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub b: f64,
    pub adversary: Adversary,
    pub trials: u64,
    pub seed: u64,
    /// Adds a Gaussian mean of norm `b * sqrt(d)`, outside `U` almost surely.
    pub offset_mean: bool,
    /// Hands the true `B` to the pipeline instead of estimating it.
    pub known_bound: bool,
    pub pipeline: PipelineConfig,
    /// Execution across trials; the pipeline's own setting applies inside.
    pub execution: Execution,
}

impl Default for PipelineExperimentConfig {
    fn default() -> Self {
        Self {
            d: 200,
            k: 2,
            s: 3,
            n: 2000,
            b: 1.0,
            adversary: Adversary::RandomSign { bound: 1.0 },
            trials: 1,
            seed: 0,
            offset_mean: false,
            known_bound: true,
            pipeline: PipelineConfig::default(),
            execution: Execution::Sequential,
        }
    }
}

impl PipelineExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        check_dims(self.d, self.k, self.s, self.trials)?;
        check(self.n >= 1, || "n must be positive".into())?;
        check(self.b.is_finite() && self.b > 0.0, || format!("B must be positive, got {}", self.b))
    }

    /// Model of trial `seed`: a fresh Gaussian factor and, optionally, mean.
    pub fn model(&self, seed: u64) -> Result<GaussianModel, ExperimentError> {
        let base = random_model(&mut rng_for(seed, STREAM_MODEL), self.d, self.k, self.b)?;
        if !self.offset_mean {
            return Ok(base);
        }
        let mut rng = rng_for(seed, STREAM_MEAN);
        let mean: Vec<f64> = (0..self.d).map(|_| self.b * rng.sample::<f64, _>(StandardNormal)).collect();
        Ok(GaussianModel::new(mean, base.factor().clone())?)
    }
}

/// End-to-end recovery per trial. Regime failures are recorded, not raised.
pub fn run_pipeline(cfg: &PipelineExperimentConfig) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    cfg.validate()?;
    par::try_map_indexed::<_, ExperimentError, _>(cfg.trials as usize, cfg.execution, |i| {
        let start = Instant::now();
        let seed = trial_seed(cfg.seed, i as u64);
        let model = cfg.model(seed)?;
        let inst = sample_instance(&model, cfg.n, cfg.s, cfg.adversary, seed)?;
        let mut pcfg = cfg.pipeline.clone();
        pcfg.subrec.seed = seed;
        let bound = cfg.known_bound.then(|| model.coord_bound());
        let mut rec = ExperimentRecord { trial: i as u64, seed, ..Default::default() };
        match recover_dataset(&inst.corrupted, &pcfg, bound) {
            Ok(mut report) => {
                report.score(&inst.clean, model.mean())?;
                rec.error = report.mean_error();
                rec.max_error = report.max_error();
                rec.mean_estimate_error = report.mean_l1_error;
                if report.subspace_recovered {
                    rec.subspace_distance = Some(principal_angle_distance(&report.subspace_used, &inst.subspace)?);
                }
            }
            Err(PipelineError::Subrec(e)) => rec.failure = Some(e.to_string()),
            Err(e) => return Err(e.into()),
        }
        rec.micros = start.elapsed().as_micros() as u64;
        Ok(rec)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub b: f64,
    pub adversary: Adversary,
    pub trials: u64,
    pub seed: u64,
    pub offset_mean: bool,
    pub subrec: SubrecConfig,
    pub execution: Execution,
}

impl Default for SubspaceExperimentConfig {
    fn default() -> Self {
        Self {
            d: 60,
            k: 3,
            s: 2,
            n: 2000,
            b: 1.0,
            adversary: Adversary::RandomSign { bound: 1.0 },
            trials: 20,
            seed: 0,
            offset_mean: false,
            subrec: SubrecConfig::default(),
            execution: Execution::Sequential,
        }
    }
}

impl SubspaceExperimentConfig {
    fn as_pipeline(&self) -> PipelineExperimentConfig {
        PipelineExperimentConfig {
            d: self.d,
            k: self.k,
            s: self.s,
            n: self.n,
            b: self.b,
            adversary: self.adversary,
            trials: self.trials,
            seed: self.seed,
            offset_mean: self.offset_mean,
            ..Default::default()
        }
    }
}

/// Subspace recovery alone; `subspace_distance` is against `span(U ∪ {mu})`.
pub fn run_subspace(cfg: &SubspaceExperimentConfig) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let pcfg = cfg.as_pipeline();
    pcfg.validate()?;
    par::try_map_indexed::<_, ExperimentError, _>(cfg.trials as usize, cfg.execution, |i| {
        let start = Instant::now();
        let seed = trial_seed(cfg.seed, i as u64);
        let model = pcfg.model(seed)?;
        let inst = sample_instance(&model, cfg.n, cfg.s, cfg.adversary, seed)?;
        let sub = SubrecConfig { seed, ..cfg.subrec.clone() };
        let mut rec = ExperimentRecord { trial: i as u64, seed, ..Default::default() };
        match recover_subspace(&inst.corrupted, &sub) {
            Ok(res) => rec.subspace_distance = Some(principal_angle_distance(&res.recovered, &inst.subspace)?),
            Err(e) => rec.failure = Some(e.to_string()),
        }
        rec.micros = start.elapsed().as_micros() as u64;
        Ok(rec)
    })
}

/// Trials whose recovered subspace is within [`SUBSPACE_MATCH_TOL`].
pub fn subspace_successes(records: &[ExperimentRecord]) -> usize {
    records.iter().filter(|r| r.subspace_distance.is_some_and(|x| x < SUBSPACE_MATCH_TOL)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.277_532).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn miss_probability_small() {
        // C(3,2)/C(5,2) = 3/10
        assert!((axis_miss_probability(5, 2, 2) - 0.3).abs() < 1e-15);
        assert_eq!(axis_miss_probability(5, 2, 0), 1.0);
        assert_eq!(axis_miss_probability(5, 3, 3), 0.0);
    }

    #[test]
    fn zero_support_has_no_error() {
        let cfg = BpTailConfig { d: 30, k: 2, s: 0, trials: 20, t_grid: vec![1e-9, 1.0], ..Default::default() };
        let res = run_bp_tail(&cfg).unwrap();
        assert!(res.errors().iter().all(|&e| e < 1e-9));
        assert!(res.rows.iter().all(|r| r.exceed == 0 && r.p_hat == 0.0));
    }

    #[test]
    fn bp_tail_is_reproducible_across_execution() {
        let base = BpTailConfig { d: 40, k: 2, s: 3, trials: 30, seed: 9, ..Default::default() };
        let a = run_bp_tail(&BpTailConfig { execution: Execution::Sequential, ..base.clone() }).unwrap();
        let b = run_bp_tail(&BpTailConfig { execution: Execution::Parallel, ..base }).unwrap();
        assert!(a.records.iter().zip(&b.records).all(|(x, y)| x.same_outcome(y)));
        assert_eq!(a.rows, b.rows);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.trial == i as u64 && r.seed == 9 ^ i as u64));
    }

    #[test]
    fn tail_rows_are_monotone_and_bounded() {
        let cfg = BpTailConfig { d: 50, k: 2, s: 4, trials: 100, t_grid: vec![0.0, 0.1, 0.5, 1.0, 2.0], ..Default::default() };
        let res = run_bp_tail(&cfg).unwrap();
        assert_eq!(res.rows[0].exceed, 100);
        for w in res.rows.windows(2) {
            assert!(w[1].exceed <= w[0].exceed);
        }
        for r in &res.rows {
            assert!((0.0..=1.0).contains(&r.p_hat));
            assert!(r.wilson_lo <= r.p_hat && r.p_hat <= r.wilson_hi);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(run_bp_tail(&BpTailConfig { k: 0, ..Default::default() }).is_err());
        assert!(run_bp_tail(&BpTailConfig { s: 601, ..Default::default() }).is_err());
        assert!(run_bp_tail(&BpTailConfig { t_grid: vec![-1.0], ..Default::default() }).is_err());
        assert!(run_pipeline(&PipelineExperimentConfig { n: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn small_pipeline_run() {
        let cfg = PipelineExperimentConfig { d: 30, k: 1, s: 1, n: 300, trials: 2, seed: 4, ..Default::default() };
        let recs = run_pipeline(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert!(r.failure.is_none(), "{:?}", r.failure);
            assert!(r.error.unwrap().is_finite());
            assert!(r.subspace_distance.unwrap() < 1e-6);
        }
    }
}
