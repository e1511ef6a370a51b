//! Cardinality-constrained bin packing (CCBP) adversary toolkit.
//!
//! Unit-capacity bins, at most `k` items per bin, items arriving online.
//! This crate provides:
//!
//! * exact arithmetic for item sizes of the form `base + Σ c_j · k^(-e_j)`
//!   whose exponents are far too large to materialize ([`exact`]),
//! * packing state, legality checks and an online execution loop ([`packing`]),
//! * pluggable online algorithms with snapshot/replay support ([`algorithms`]),
//! * the adaptive sub-input generators that binary-search item-size
//!   exponents against the algorithm's placements ([`procedures`]),
//! * complete adversary strategies that play an algorithm, build verified
//!   offline packings and emit lower-bound certificates ([`strategies`]),
//! * exact reproduction of the published lower-bound values by parametric
//!   feasibility search over rational linear programs ([`bounds`]).

pub mod algorithms;
pub mod bounds;
pub mod exact;
pub mod packing;
pub mod procedures;
pub mod strategies;

pub use exact::{GapConfig, Sign, SymbolicSize};
pub use packing::{BinProfile, Item, PackingState, PlacementDecision};
