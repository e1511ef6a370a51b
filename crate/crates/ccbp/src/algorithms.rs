//! Pluggable online CCBP algorithms.
//!
//! Algorithms see the full packing state read-only and answer with a
//! placement decision; legality is checked by the packing layer. Every
//! algorithm is deterministic given its construction (randomized variants
//! carry an explicit seed), and can be snapshotted so the adversary can
//! evaluate several input continuations from a common prefix.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exact::{Sign, SymbolicSize};
use crate::packing::{Item, PackingState, PlacementDecision};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgorithmError {
    #[error("unknown algorithm spec {0:?}")]
    UnknownSpec(String),
    #[error("invalid seed in spec {0:?}")]
    InvalidSeed(String),
}

/// The algorithm side of the online game.
pub trait OnlineAlgorithm: Send {
    /// Selector string this instance was built from (e.g. `random-fit:7`).
    fn name(&self) -> String;

    /// Chooses a bin (or a new bin) for `item` given the current state.
    fn decide(&mut self, item: &Item, state: &PackingState) -> PlacementDecision;

    /// Frozen copy of the full internal state. Continuing the copy and
    /// continuing `self` from this point yield identical decisions.
    fn snapshot(&self) -> Box<dyn OnlineAlgorithm>;
}

fn feasible(state: &PackingState, bin: usize, item: &Item) -> bool {
    state.placement_fits(bin, item).unwrap_or(false)
}

fn cmp_load(state: &PackingState, a: usize, b: usize) -> std::cmp::Ordering {
    state.bins()[a]
        .load()
        .cmp_exact(state.bins()[b].load())
        .expect("bin loads generated by one run are always comparable")
}

#[derive(Clone)]
struct FirstFit;

impl OnlineAlgorithm for FirstFit {
    fn name(&self) -> String {
        "first-fit".into()
    }

    fn decide(&mut self, item: &Item, state: &PackingState) -> PlacementDecision {
        (0..state.bin_count())
            .find(|&b| feasible(state, b, item))
            .map_or(PlacementDecision::NewBin, PlacementDecision::Existing)
    }

    fn snapshot(&self) -> Box<dyn OnlineAlgorithm> {
        Box::new(self.clone())
    }
}

/// Feasible bin of maximal load, ties to the lowest index.
#[derive(Clone)]
struct BestFit;

impl OnlineAlgorithm for BestFit {
    fn name(&self) -> String {
        "best-fit".into()
    }

    fn decide(&mut self, item: &Item, state: &PackingState) -> PlacementDecision {
        let mut best: Option<usize> = None;
        for b in 0..state.bin_count() {
            if !feasible(state, b, item) {
                continue;
            }
            best = match best {
                None => Some(b),
                Some(cur) => {
                    if cmp_load(state, b, cur) == std::cmp::Ordering::Greater {
                        Some(b)
                    } else {
                        Some(cur)
                    }
                }
            };
        }
        best.map_or(PlacementDecision::NewBin, PlacementDecision::Existing)
    }

    fn snapshot(&self) -> Box<dyn OnlineAlgorithm> {
        Box::new(self.clone())
    }
}

/// Keeps filling the most recently opened bin.
#[derive(Clone)]
struct NextFit;

impl OnlineAlgorithm for NextFit {
    fn name(&self) -> String {
        "next-fit".into()
    }

    fn decide(&mut self, item: &Item, state: &PackingState) -> PlacementDecision {
        match state.bin_count() {
            0 => PlacementDecision::NewBin,
            n if feasible(state, n - 1, item) => PlacementDecision::Existing(n - 1),
            _ => PlacementDecision::NewBin,
        }
    }

    fn snapshot(&self) -> Box<dyn OnlineAlgorithm> {
        Box::new(self.clone())
    }
}

/// Feasible bin of minimal load, ties to the lowest index.
#[derive(Clone)]
struct WorstFit;

impl OnlineAlgorithm for WorstFit {
    fn name(&self) -> String {
        "worst-fit".into()
    }

    fn decide(&mut self, item: &Item, state: &PackingState) -> PlacementDecision {
        let mut best: Option<usize> = None;
        for b in 0..state.bin_count() {
            if !feasible(state, b, item) {
                continue;
            }
            best = match best {
                None => Some(b),
                Some(cur) => {
                    if cmp_load(state, b, cur) == std::cmp::Ordering::Less {
                        Some(b)
                    } else {
                        Some(cur)
                    }
                }
            };
        }
        best.map_or(PlacementDecision::NewBin, PlacementDecision::Existing)
    }

    fn snapshot(&self) -> Box<dyn OnlineAlgorithm> {
        Box::new(self.clone())
    }
}

#[derive(Clone)]
struct AlwaysNewBin;

impl OnlineAlgorithm for AlwaysNewBin {
    fn name(&self) -> String {
        "always-new-bin".into()
    }

    fn decide(&mut self, _item: &Item, _state: &PackingState) -> PlacementDecision {
        PlacementDecision::NewBin
    }

    fn snapshot(&self) -> Box<dyn OnlineAlgorithm> {
        Box::new(self.clone())
    }
}

/// Uniform choice over all feasible bins plus "open a new bin".
#[derive(Clone)]
struct RandomFit {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomFit {
    fn new(seed: u64) -> Self {
        RandomFit {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl OnlineAlgorithm for RandomFit {
    fn name(&self) -> String {
        format!("random-fit:{}", self.seed)
    }

    fn decide(&mut self, item: &Item, state: &PackingState) -> PlacementDecision {
        let feasible: Vec<usize> = (0..state.bin_count())
            .filter(|&b| self::feasible(state, b, item))
            .collect();
        let pick = self.rng.gen_range(0..=feasible.len());
        if pick == feasible.len() {
            PlacementDecision::NewBin
        } else {
            PlacementDecision::Existing(feasible[pick])
        }
    }

    fn snapshot(&self) -> Box<dyn OnlineAlgorithm> {
        Box::new(self.clone())
    }
}

/// Builds an algorithm from its CLI selector string.
///
/// Recognized: `first-fit`, `best-fit`, `next-fit`, `worst-fit`,
/// `always-new-bin`, `random-fit:SEED`.
pub fn from_spec(spec: &str) -> Result<Box<dyn OnlineAlgorithm>, AlgorithmError> {
    match spec.trim() {
        "first-fit" => Ok(Box::new(FirstFit)),
        "best-fit" => Ok(Box::new(BestFit)),
        "next-fit" => Ok(Box::new(NextFit)),
        "worst-fit" => Ok(Box::new(WorstFit)),
        "always-new-bin" => Ok(Box::new(AlwaysNewBin)),
        s => match s.split_once(':') {
            Some(("random-fit", seed)) => {
                let seed: u64 = seed
                    .parse()
                    .map_err(|_| AlgorithmError::InvalidSeed(spec.to_string()))?;
                Ok(Box::new(RandomFit::new(seed)))
            }
            _ => Err(AlgorithmError::UnknownSpec(spec.to_string())),
        },
    }
}

/// The deterministic built-ins, in registry order.
pub const BUILTIN_SPECS: [&str; 5] = [
    "first-fit",
    "best-fit",
    "next-fit",
    "worst-fit",
    "always-new-bin",
];

/// True when the size is strictly above one half (handy for bin-count
/// lower bounds: two such items never share a bin).
pub fn above_half(size: &SymbolicSize) -> bool {
    size.sub(&SymbolicSize::from_ratio(1, 2, size.radix()))
        .and_then(|d| d.sign())
        .map(|s| s == Sign::Positive)
        .unwrap_or(false)
}

/// Rounds a rational down to u64, saturating; used only for reporting.
pub fn rational_floor_u64(r: &num_rational::BigRational) -> u64 {
    r.to_integer().to_u64().unwrap_or(u64::MAX)
}
