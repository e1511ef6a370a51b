//! One adversary-vs-algorithm game: shared packing state, the live
//! algorithm instance and the decision trace.

use crate::algorithms::OnlineAlgorithm;
use crate::exact::SymbolicSize;
use crate::packing::{Item, PackingError, PackingState, PhaseTag, PlacementDecision, TraceEntry};

pub struct GameSession {
    state: PackingState,
    algorithm: Box<dyn OnlineAlgorithm>,
    trace: Vec<TraceEntry>,
    items: Vec<Item>,
    next_id: u64,
}

impl GameSession {
    pub fn new(k: u32, algorithm: Box<dyn OnlineAlgorithm>) -> Self {
        GameSession {
            state: PackingState::new(k),
            algorithm,
            trace: Vec::new(),
            items: Vec::new(),
            next_id: 0,
        }
    }

    pub fn k(&self) -> u32 {
        self.state.k()
    }

    pub fn state(&self) -> &PackingState {
        &self.state
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// All items presented so far, in order.
    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn bin_count(&self) -> usize {
        self.state.bin_count()
    }

    pub fn algorithm_name(&self) -> String {
        self.algorithm.name()
    }

    /// Presents one item: asks the algorithm, applies the move, records it.
    /// Returns the decision and the index of the bin that received the item.
    pub fn present(
        &mut self,
        size: SymbolicSize,
        tag: PhaseTag,
    ) -> Result<(u64, PlacementDecision, usize), PackingError> {
        let (id, decision, bin, ()) = self.present_with(size, tag, |_, _| ())?;
        Ok((id, decision, bin))
    }

    /// Like [`present`](Self::present), but runs `inspect` on the decision
    /// and the state as it was when the algorithm decided, before the move
    /// is applied. This is how classification conditions observe the game.
    pub fn present_with<R>(
        &mut self,
        size: SymbolicSize,
        tag: PhaseTag,
        inspect: impl FnOnce(PlacementDecision, &PackingState) -> R,
    ) -> Result<(u64, PlacementDecision, usize, R), PackingError> {
        let item = Item {
            id: self.next_id,
            size,
            tag,
        };
        let decision = self.algorithm.decide(&item, &self.state);
        let inspection = inspect(decision, &self.state);
        self.items.push(item.clone());
        let bin = self.state.apply_placement(item, decision)?;
        self.trace.push(TraceEntry {
            item_id: self.next_id,
            bin_index: bin,
            new_bin: matches!(decision, PlacementDecision::NewBin),
        });
        self.next_id += 1;
        Ok((self.next_id - 1, decision, bin, inspection))
    }

    /// Independent continuation sharing this session's full history.
    /// Branching twice and feeding the same items yields identical play.
    pub fn branch(&self) -> GameSession {
        GameSession {
            state: self.state.clone(),
            algorithm: self.algorithm.snapshot(),
            trace: self.trace.clone(),
            items: self.items.clone(),
            next_id: self.next_id,
        }
    }
}
