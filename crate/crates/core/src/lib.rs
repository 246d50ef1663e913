//! Recovery of low-rank Gaussian data from rows with a few corrupted
//! coordinates.
//!
//! Each row is repaired by Basis Pursuit, `min ||x_tilde - u||_1` over `u` in a
//! known subspace ([`bp`]), solved with a small dense simplex ([`lp`]). When the
//! subspace is unknown it is recovered exactly from the corrupted sample
//! ([`subrec`]), and [`pipeline`] chains clipping, subspace recovery and
//! per-row BP into a mean estimate. [`combinat`] holds the set-system tools
//! used to study when BP fails; [`experiment`] runs seeded Monte Carlo trials.
//!
//! Trials and per-row work run on rayon unless the `parallel` feature is off
//! or [`par::Execution::Sequential`] is requested; results do not depend on
//! the choice.

pub mod bp;
pub mod combinat;
pub mod experiment;
pub mod gen;
pub mod io;
pub mod lp;
pub mod par;
pub mod pipeline;
pub mod subrec;
pub mod subspace;

pub use bp::{recover, tail_bounds, BpResult, TailBounds};
pub use gen::{sample_instance, Adversary, ProblemInstance};
pub use par::Execution;
pub use pipeline::{recover_dataset, PipelineConfig, RecoveryReport};
pub use subrec::{recover_subspace, SubrecConfig};
pub use subspace::{GaussianModel, IndexSet, Subspace};
