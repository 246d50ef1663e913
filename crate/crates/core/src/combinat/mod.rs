//! Extremal set combinatorics: dominant sets, packings, perfect matchings and
//! the bounded-intersection family search.

mod aggregate;
mod conjecture;
mod dominance;
mod family;
pub mod gf;
mod matching;
mod packing;

use thiserror::Error;

pub use aggregate::aggregate_columns;
pub use conjecture::{
    conjectured_family_bounds, fi_family, max_family_no_matchable, max_family_no_matchable_with, multiset_matchable, FamilyBounds, FamilySearch,
    SearchOptions,
};
pub use dominance::{
    axis_dominance, axis_witness, dominance_heuristic, indicator_mass, is_dominant_t1, DominanceCertificate,
    HeuristicVerdict, MAX_SIGN_PATTERN_SET,
};
pub use family::{binomial, SetFamily};
pub use matching::{has_perfect_matching, max_bipartite_matching, MatchingResult};
pub use packing::{block_packing, build_packing, build_packing_with_q, choose_q, verify_packing};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombinatError {
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("no prime or power of two q with {s} <= q and {s} q <= {d}")]
    NoValidQ { d: usize, s: usize },
    #[error("parts overlap at column {0}")]
    OverlappingParts(usize),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
}
