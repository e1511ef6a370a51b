//! Items, bins, online packing state and the online execution loop.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{fits_in_bin, ExactError, Sign, SymbolicSize};

/// Which of the two procedure conditions an item satisfied.
///
/// `Small` items end up smaller than every item presented after them,
/// `Large` items larger; see [`crate::procedures`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeClass {
    #[serde(rename = "C1")]
    Small,
    #[serde(rename = "C2")]
    Large,
}

/// Provenance label attached to every item.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTag {
    pub phase: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<SizeClass>,
}

impl PhaseTag {
    pub fn phase(phase: u32) -> Self {
        PhaseTag {
            phase,
            part: None,
            class: None,
        }
    }
}

/// One input item. Ids are strictly increasing in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: u64,
    pub size: SymbolicSize,
    pub tag: PhaseTag,
}

/// An algorithm's answer for one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementDecision {
    Existing(usize),
    NewBin,
}

/// What went wrong when applying a placement. An illegal move means a buggy
/// algorithm; the run is aborted, never repaired.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PackingError {
    #[error("bin {bin} would exceed capacity 1")]
    Capacity { bin: usize },
    #[error("bin {bin} already holds k items")]
    Cardinality { bin: usize },
    #[error("no such bin {bin}")]
    NoSuchBin { bin: usize },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Debug, Clone)]
pub struct Bin {
    items: Vec<Item>,
    load: SymbolicSize,
}

impl Bin {
    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn load(&self) -> &SymbolicSize {
        &self.load
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Bins under capacity 1 and cardinality `k`. Bins are identified by
/// creation index and never move.
#[derive(Debug, Clone)]
pub struct PackingState {
    k: u32,
    bins: Vec<Bin>,
}

impl PackingState {
    pub fn new(k: u32) -> Self {
        assert!(k >= 2, "cardinality parameter must be at least 2");
        PackingState { k, bins: Vec::new() }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn item_count(&self) -> usize {
        self.bins.iter().map(Bin::len).sum()
    }

    /// Can `item` legally join bin `bin`?
    pub fn placement_fits(&self, bin: usize, item: &Item) -> Result<bool, PackingError> {
        let b = self.bins.get(bin).ok_or(PackingError::NoSuchBin { bin })?;
        if b.len() >= self.k as usize {
            return Ok(false);
        }
        let load = b.load.add(&item.size)?;
        let slack = load.sub(&SymbolicSize::one(self.k))?;
        Ok(matches!(slack.sign()?, Sign::Negative | Sign::Zero))
    }

    /// Applies a placement, erroring out on any illegal decision.
    pub fn apply_placement(
        &mut self,
        item: Item,
        decision: PlacementDecision,
    ) -> Result<usize, PackingError> {
        match decision {
            PlacementDecision::NewBin => {
                let load = item.size.clone();
                self.bins.push(Bin {
                    items: vec![item],
                    load,
                });
                Ok(self.bins.len() - 1)
            }
            PlacementDecision::Existing(bin) => {
                let b = self.bins.get(bin).ok_or(PackingError::NoSuchBin { bin })?;
                if b.len() >= self.k as usize {
                    return Err(PackingError::Cardinality { bin });
                }
                let load = b.load.add(&item.size)?;
                let slack = load.sub(&SymbolicSize::one(self.k))?;
                if slack.sign()? == Sign::Positive {
                    return Err(PackingError::Capacity { bin });
                }
                let b = &mut self.bins[bin];
                b.items.push(item);
                b.load = load;
                Ok(bin)
            }
        }
    }

    /// Counts of bins per occupancy level.
    pub fn profile(&self) -> BinProfile {
        let mut counts = vec![0u64; self.k as usize + 1];
        for b in &self.bins {
            counts[b.len()] += 1;
        }
        BinProfile { counts }
    }
}

/// `X_ℓ` for `ℓ = 1..k`: number of bins holding exactly `ℓ` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinProfile {
    counts: Vec<u64>,
}

impl BinProfile {
    /// Bins with exactly `level` items.
    pub fn with_items(&self, level: usize) -> u64 {
        self.counts.get(level).copied().unwrap_or(0)
    }

    /// Bins with at most `level` items (levels start at 1; empty bins never exist).
    pub fn with_at_most(&self, level: usize) -> u64 {
        (1..=level.min(self.counts.len() - 1))
            .map(|l| self.counts[l])
            .sum()
    }

    pub fn total_bins(&self) -> u64 {
        self.counts[1..].iter().sum()
    }

    pub fn total_items(&self) -> u64 {
        self.counts[1..]
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u64 + 1) * c)
            .sum()
    }
}

/// One violation found by [`verify_packing`]. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    CapacityExceeded { bin: usize },
    CardinalityExceeded { bin: usize },
    DuplicateAssignment { item_id: u64 },
    UnassignedItem { item_id: u64 },
    UnknownItem { item_id: u64 },
}

/// Checks a full offline assignment: every item placed exactly once and
/// every bin feasible. Empty result means the packing is valid.
pub fn verify_packing(
    items: &[Item],
    assignment: &[(u64, usize)],
    k: u32,
) -> Result<Vec<Violation>, ExactError> {
    let mut violations = Vec::new();
    let mut seen = std::collections::HashMap::new();
    let by_id: std::collections::HashMap<u64, &Item> =
        items.iter().map(|it| (it.id, it)).collect();

    let mut bins: std::collections::BTreeMap<usize, Vec<&Item>> = Default::default();
    for &(item_id, bin) in assignment {
        match by_id.get(&item_id) {
            None => violations.push(Violation::UnknownItem { item_id }),
            Some(item) => {
                if *seen.entry(item_id).and_modify(|c| *c += 1).or_insert(1u32) > 1 {
                    violations.push(Violation::DuplicateAssignment { item_id });
                } else {
                    bins.entry(bin).or_default().push(item);
                }
            }
        }
    }
    for item in items {
        if !seen.contains_key(&item.id) {
            violations.push(Violation::UnassignedItem { item_id: item.id });
        }
    }
    for (bin, members) in &bins {
        if members.len() > k as usize {
            violations.push(Violation::CardinalityExceeded { bin: *bin });
            continue;
        }
        let sizes: Vec<SymbolicSize> = members.iter().map(|it| it.size.clone()).collect();
        if !fits_in_bin(&sizes, k)? {
            violations.push(Violation::CapacityExceeded { bin: *bin });
        }
    }
    Ok(violations)
}

/// One decision of the online game, as recorded in certificates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub item_id: u64,
    pub bin_index: usize,
    pub new_bin: bool,
}

/// Feeds a fixed item stream to an algorithm and returns the final state
/// plus the decision trace. Aborts on the first illegal decision.
pub fn run_online(
    algorithm: &mut dyn crate::algorithms::OnlineAlgorithm,
    items: impl IntoIterator<Item = Item>,
    k: u32,
) -> Result<(PackingState, Vec<TraceEntry>), PackingError> {
    let mut state = PackingState::new(k);
    let mut trace = Vec::new();
    for item in items {
        let decision = algorithm.decide(&item, &state);
        let id = item.id;
        let bin = state.apply_placement(item, decision)?;
        trace.push(TraceEntry {
            item_id: id,
            bin_index: bin,
            new_bin: matches!(decision, PlacementDecision::NewBin),
        });
    }
    Ok((state, trace))
}

/// Builds an item with a plain rational size, mostly for tests and the CLI.
pub fn rational_item(id: u64, p: i64, q: i64, k: u32) -> Item {
    Item {
        id,
        size: SymbolicSize::from_ratio(p, q, k),
        tag: PhaseTag::phase(0),
    }
}

/// Item with size `k^(-exponent)`.
pub fn power_item(id: u64, k: u32, exponent: BigUint) -> Item {
    Item {
        id,
        size: SymbolicSize::power(k, exponent),
        tag: PhaseTag::phase(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms;

    fn item(id: u64, p: i64, q: i64) -> Item {
        rational_item(id, p, q, 2)
    }

    #[test]
    fn apply_placement_new_bin() {
        let mut st = PackingState::new(2);
        st.apply_placement(item(0, 3, 5), PlacementDecision::NewBin).unwrap();
        assert_eq!(st.bin_count(), 1);
        assert_eq!(st.bins()[0].len(), 1);
    }

    #[test]
    fn apply_placement_capacity_error() {
        let mut st = PackingState::new(2);
        st.apply_placement(item(0, 3, 5), PlacementDecision::NewBin).unwrap();
        let err = st
            .apply_placement(item(1, 1, 2), PlacementDecision::Existing(0))
            .unwrap_err();
        assert_eq!(err, PackingError::Capacity { bin: 0 });
    }

    #[test]
    fn apply_placement_cardinality_error() {
        let mut st = PackingState::new(2);
        st.apply_placement(item(0, 1, 10), PlacementDecision::NewBin).unwrap();
        st.apply_placement(item(1, 1, 10), PlacementDecision::Existing(0)).unwrap();
        let err = st
            .apply_placement(item(2, 1, 10), PlacementDecision::Existing(0))
            .unwrap_err();
        assert_eq!(err, PackingError::Cardinality { bin: 0 });
    }

    #[test]
    fn verify_packing_examples() {
        let items: Vec<Item> = (0..4).map(|i| rational_item(i, 3, 10, 2)).collect();
        let assignment = vec![(0, 0), (1, 0), (2, 1), (3, 1)];
        assert!(verify_packing(&items, &assignment, 2).unwrap().is_empty());

        let items3 = vec![
            rational_item(0, 3, 5, 3),
            rational_item(1, 1, 2, 3),
            rational_item(2, 1, 10, 3),
        ];
        let tri = vec![(0, 0), (1, 0), (2, 0)];
        assert_eq!(
            verify_packing(&items3, &tri, 3).unwrap(),
            vec![Violation::CapacityExceeded { bin: 0 }]
        );

        let dup = vec![(0, 0), (0, 1), (1, 2), (2, 3)];
        let v = verify_packing(&items3, &dup, 3).unwrap();
        assert!(v.contains(&Violation::DuplicateAssignment { item_id: 0 }));
    }

    #[test]
    fn profile_counts() {
        let mut st = PackingState::new(3);
        for i in 0..3 {
            st.apply_placement(rational_item(i, 1, 10, 3), PlacementDecision::NewBin).unwrap();
        }
        let p = st.profile();
        assert_eq!(p.with_items(1), 3);
        assert_eq!(p.with_items(2), 0);
        assert_eq!(p.with_items(3), 0);
        assert_eq!(p.total_items(), 3);

        let mut st2 = PackingState::new(2);
        st2.apply_placement(rational_item(0, 1, 10, 2), PlacementDecision::NewBin).unwrap();
        st2.apply_placement(rational_item(1, 1, 10, 2), PlacementDecision::NewBin).unwrap();
        st2.apply_placement(rational_item(2, 1, 10, 2), PlacementDecision::Existing(1)).unwrap();
        let p2 = st2.profile();
        assert_eq!((p2.with_items(1), p2.with_items(2)), (1, 1));

        assert_eq!(PackingState::new(2).profile().total_bins(), 0);
    }

    #[test]
    fn run_online_hand_simulations() {
        let mut ff = algorithms::from_spec("first-fit").unwrap();
        let items = vec![item(0, 3, 5), item(1, 3, 5), item(2, 3, 10)];
        let (st, trace) = run_online(ff.as_mut(), items, 2).unwrap();
        assert_eq!(st.bin_count(), 2);
        assert_eq!(st.bins()[0].len(), 2); // 0.6 + 0.3
        assert_eq!(st.bins()[1].len(), 1);
        assert_eq!(trace.len(), 3);
        assert!(trace[2].bin_index == 0 && !trace[2].new_bin);

        let mut nf = algorithms::from_spec("next-fit").unwrap();
        let items = vec![item(0, 1, 2), item(1, 3, 5), item(2, 2, 5)];
        let (st, _) = run_online(nf.as_mut(), items, 2).unwrap();
        assert_eq!(st.bin_count(), 2);
        assert_eq!(st.bins()[1].len(), 2); // {0.6, 0.4}

        let mut any = algorithms::from_spec("best-fit").unwrap();
        let (st, trace) = run_online(any.as_mut(), Vec::new(), 2).unwrap();
        assert_eq!(st.bin_count(), 0);
        assert!(trace.is_empty());
    }

    #[test]
    fn replayed_trace_verifies() {
        let mut bf = algorithms::from_spec("best-fit").unwrap();
        let items: Vec<Item> = (0..12).map(|i| rational_item(i, (i as i64 % 4) + 1, 7, 3)).collect();
        let (st, trace) = run_online(bf.as_mut(), items.clone(), 3).unwrap();
        let assignment: Vec<(u64, usize)> =
            trace.iter().map(|t| (t.item_id, t.bin_index)).collect();
        assert!(verify_packing(&items, &assignment, 3).unwrap().is_empty());
        assert_eq!(st.profile().total_items(), 12);
    }
}
