//! `lowrank-bp`: experiment harness for Basis Pursuit recovery.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 regime failure (subspace recovery found no consensus), 4 internal
//! invariant violation.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowrank_bp::bp::BpError;
use lowrank_bp::combinat::CombinatError;
use lowrank_bp::experiment::ExperimentError;
use lowrank_bp::gen::GenError;
use lowrank_bp::io::IoError;
use lowrank_bp::lp::LpError;
use lowrank_bp::pipeline::PipelineError;
use lowrank_bp::subrec::SubrecError;
use thiserror::Error;

use config::{Defaults, ExperimentArgs, PipelineFlags};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("regime failure: {0}")]
    Regime(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) | CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Regime(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Other(e.to_string())
    }
}

fn lp_error(e: &LpError) -> CliError {
    match e {
        LpError::IterationLimit(_) | LpError::SingularBasis | LpError::Infeasible | LpError::Unbounded => {
            CliError::Invariant(e.to_string())
        }
        _ => CliError::Other(e.to_string()),
    }
}

impl From<BpError> for CliError {
    fn from(e: BpError) -> Self {
        match &e {
            BpError::Internal(_) => CliError::Invariant(e.to_string()),
            BpError::Lp(lp) => lp_error(lp),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<SubrecError> for CliError {
    fn from(e: SubrecError) -> Self {
        match e {
            SubrecError::EmptyInput => CliError::Other(e.to_string()),
            _ => CliError::Regime(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidConfig(m) => CliError::Config(m),
            PipelineError::Subrec(s) => s.into(),
            PipelineError::Bp(b) => b.into(),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Linalg(_) => CliError::Other(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(m) => CliError::Config(m),
            ExperimentError::Gen(g) => g.into(),
            ExperimentError::Bp(b) => b.into(),
            ExperimentError::Pipeline(p) => p.into(),
            ExperimentError::Subrec(s) => s.into(),
            ExperimentError::Linalg(l) => CliError::Other(l.to_string()),
        }
    }
}

impl From<CombinatError> for CliError {
    fn from(e: CombinatError) -> Self {
        match e {
            CombinatError::Lp(lp) => lp_error(&lp),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "lowrank-bp", version, about = "Basis Pursuit recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical tail of the single-row BP error against the tail bounds.
    BpTail {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Per-trial CSV (trial, seed, error, micros).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Clipping, subspace recovery and per-row BP, one data set per trial.
    Pipeline {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Recover a stored instance instead of sampling.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Also store trial 0's instance here.
        #[arg(long)]
        emit_instance: Option<PathBuf>,
        /// Mean outside the subspace.
        #[arg(long)]
        offset_mean: bool,
        /// Estimate B from the data instead of using the model's.
        #[arg(long)]
        estimate_bound: bool,
        #[arg(long)]
        truncation_multiplier: Option<f64>,
        /// sample-mean | coordinate-median
        #[arg(long)]
        mean_estimator: Option<String>,
    },
    /// Subspace recovery alone.
    Subspace {
        #[command(flatten)]
        args: ExperimentArgs,
        #[arg(long)]
        offset_mean: bool,
    },
    /// Set-system checks.
    Combinat {
        #[command(subcommand)]
        command: CombinatCommand,
    },
    /// Tail bounds over a t grid, and the expected-error bound.
    Bounds {
        #[command(flatten)]
        args: ExperimentArgs,
    },
}

#[derive(Subcommand)]
enum CombinatCommand {
    /// Build the finite-field packing and check its intersections.
    VerifyPacking {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        delta: usize,
        /// Field size; chosen automatically when absent.
        #[arg(long)]
        q: Option<u32>,
    },
    /// Exact largest family without a matchable k-multiset, against max |F_i|.
    Conjecture {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        node_limit: Option<u64>,
    },
    /// Can the sets be perfectly s-matched?
    Matching {
        /// Sets separated by `;`, e.g. "1 2;1 2".
        #[arg(long, conflicts_with = "file")]
        sets: Option<String>,
        /// One set per line.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        s: usize,
        /// Print the chosen subsets.
        #[arg(long)]
        witness: bool,
    },
}

fn configure_threads() -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Ok(v) = std::env::var("LOWRANKBP_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("LOWRANKBP_THREADS={v:?} is not a number")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Other(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::BpTail { args, records } => {
            let st = args.resolve(Defaults { d: 600, k: 2, s: 3, n: 1, trials: 1000 }, &PipelineFlags::default())?;
            commands::bp_tail(&st, records.as_deref())
        }
        Command::Pipeline { args, instance, emit_instance, offset_mean, estimate_bound, truncation_multiplier, mean_estimator } => {
            let flags = PipelineFlags { offset_mean, estimate_bound, truncation_multiplier, mean_estimator };
            let st = args.resolve(Defaults { d: 200, k: 2, s: 3, n: 2000, trials: 1 }, &flags)?;
            match instance {
                Some(p) => commands::pipeline_instance(&st, &p),
                None => commands::pipeline(&st, emit_instance.as_deref()),
            }
        }
        Command::Subspace { args, offset_mean } => {
            let flags = PipelineFlags { offset_mean, ..PipelineFlags::default() };
            let st = args.resolve(Defaults { d: 60, k: 3, s: 2, n: 2000, trials: 20 }, &flags)?;
            commands::subspace(&st)
        }
        Command::Bounds { args } => {
            let st = args.resolve(Defaults { d: 600, k: 2, s: 3, n: 1, trials: 1 }, &PipelineFlags::default())?;
            commands::bounds(&st)
        }
        Command::Combinat { command } => {
            let line = match command {
                CombinatCommand::VerifyPacking { d, s, delta, q } => commands::verify_packing_cmd(d, s, delta, q)?,
                CombinatCommand::Conjecture { d, s, k, t, node_limit } => commands::conjecture_cmd(d, s, k, t, node_limit)?,
                CombinatCommand::Matching { sets, file, s, witness } => {
                    let text = match (sets, file) {
                        (Some(t), _) => t,
                        (None, Some(p)) => std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?,
                        (None, None) => return Err(CliError::Config("give --sets or --file".into())),
                    };
                    commands::matching_cmd(&commands::parse_sets(&text)?, s, witness)?
                }
            };
            println!("{line}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
