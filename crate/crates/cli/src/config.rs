//! Experiment parameters from a TOML file, overridden by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use lowrank_bp::experiment::SubspaceKind;
use lowrank_bp::pipeline::MeanEstimator;
use lowrank_bp::{Adversary, Execution};
use serde::Deserialize;

use crate::CliError;

#[derive(Args, Debug, Clone, Default)]
pub struct ExperimentArgs {
    /// Ambient dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Subspace dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Corrupted coordinates per row.
    #[arg(long)]
    pub s: Option<usize>,
    /// Rows per trial.
    #[arg(long)]
    pub n: Option<usize>,
    /// Coordinate bound of the model.
    #[arg(long = "B")]
    pub b: Option<f64>,
    /// zero-out | random-sign[:B] | worst-case-1d[:B] | large-spike[:M]
    #[arg(long)]
    pub adversary: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// random | axis
    #[arg(long)]
    pub subspace: Option<String>,
    /// CSV output; a JSON summary is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with any of the above keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run trials one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    d: Option<usize>,
    k: Option<usize>,
    s: Option<usize>,
    n: Option<usize>,
    #[serde(rename = "B", alias = "b")]
    b: Option<f64>,
    adversary: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    t_grid: Option<Vec<f64>>,
    subspace: Option<String>,
    out: Option<PathBuf>,
    sequential: Option<bool>,
    offset_mean: Option<bool>,
    estimate_bound: Option<bool>,
    truncation_multiplier: Option<f64>,
    mean_estimator: Option<String>,
}

/// Fully resolved parameters.
#[derive(Debug, Clone)]
pub struct Settings {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub b: f64,
    pub adversary: Adversary,
    pub trials: u64,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub subspace: SubspaceKind,
    pub out: Option<PathBuf>,
    pub execution: Execution,
    pub offset_mean: bool,
    pub estimate_bound: bool,
    pub truncation_multiplier: f64,
    pub mean_estimator: MeanEstimator,
}

/// Command-specific defaults.
pub struct Defaults {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub trials: u64,
}

/// Extra pipeline switches that can also come from the config file.
#[derive(Debug, Clone, Default)]
pub struct PipelineFlags {
    pub offset_mean: bool,
    pub estimate_bound: bool,
    pub truncation_multiplier: Option<f64>,
    pub mean_estimator: Option<String>,
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_mean_estimator(s: &str) -> Result<MeanEstimator, CliError> {
    match s {
        "sample-mean" => Ok(MeanEstimator::SampleMean),
        "coordinate-median" => Ok(MeanEstimator::CoordinateMedian),
        _ => Err(CliError::Config(format!("unknown mean estimator {s:?}"))),
    }
}

impl ExperimentArgs {
    pub fn resolve(&self, defaults: Defaults, extra: &PipelineFlags) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let b = self.b.or(file.b).unwrap_or(1.0);
        let adversary = match self.adversary.as_ref().or(file.adversary.as_ref()) {
            Some(a) => a.parse::<Adversary>().map_err(|e| CliError::Config(e.to_string()))?,
            None => Adversary::RandomSign { bound: b },
        };
        let subspace = match self.subspace.as_ref().or(file.subspace.as_ref()) {
            Some(s) => s.parse::<SubspaceKind>().map_err(CliError::Config)?,
            None => SubspaceKind::Random,
        };
        let mean_estimator = match extra.mean_estimator.as_ref().or(file.mean_estimator.as_ref()) {
            Some(m) => parse_mean_estimator(m)?,
            None => MeanEstimator::SampleMean,
        };
        let sequential = self.sequential || file.sequential.unwrap_or(false);
        let settings = Settings {
            d: self.d.or(file.d).unwrap_or(defaults.d),
            k: self.k.or(file.k).unwrap_or(defaults.k),
            s: self.s.or(file.s).unwrap_or(defaults.s),
            n: self.n.or(file.n).unwrap_or(defaults.n),
            b,
            adversary,
            trials: self.trials.or(file.trials).unwrap_or(defaults.trials),
            seed: self.seed.or(file.seed).unwrap_or(0),
            t_grid: self.t_grid.clone().or(file.t_grid).unwrap_or_else(|| vec![0.01, 1.0, 4.0, 8.0]),
            subspace,
            out: self.out.clone().or(file.out),
            execution: if sequential { Execution::Sequential } else { Execution::Parallel },
            offset_mean: extra.offset_mean || file.offset_mean.unwrap_or(false),
            estimate_bound: extra.estimate_bound || file.estimate_bound.unwrap_or(false),
            truncation_multiplier: extra.truncation_multiplier.or(file.truncation_multiplier).unwrap_or(3.0),
            mean_estimator,
        };
        settings.validate()?;
        Ok(settings)
    }
}

impl Settings {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.k == 0 || self.k > self.d {
            return bad(format!("need 1 <= k <= d, got k={} d={}", self.k, self.d));
        }
        if self.s > self.d {
            return bad(format!("need s <= d, got s={} d={}", self.s, self.d));
        }
        if self.n == 0 || self.trials == 0 {
            return bad("n and trials must be positive".into());
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad(format!("B must be positive, got {}", self.b));
        }
        if self.t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("t grid entries must be finite and non-negative".into());
        }
        if !(self.truncation_multiplier.is_finite() && self.truncation_multiplier > 0.0) {
            return bad("truncation multiplier must be positive".into());
        }
        Ok(())
    }
}
