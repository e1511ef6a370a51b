//! Adaptive sub-input generators.
//!
//! All three generators share one engine: a binary search over exponents.
//! An open window `(lo, hi)` brackets the exponents of all future items;
//! each new item probes the midpoint `x = (lo+hi)/2` and the algorithm's
//! reaction moves one end of the window onto the probe. Items classified
//! `Small` keep exponents at or above every later window (their sizes stay
//! below every later item), items classified `Large` the opposite, so the
//! two classes end up separated by a multiplicative gap of at least
//! `k^(2B)` no matter how the algorithm plays.
//!
//! Exponents are scaled by the gap multiplier `B` relative to the bare
//! binary-search values; every downstream inequality depends only on
//! exponent ordering and gap width, both of which the scaling preserves.
//! The window arithmetic is re-checked after every step instead of trusted.

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::exact::{GapConfig, SymbolicSize};
use crate::packing::{PackingError, PackingState, PhaseTag, PlacementDecision, SizeClass};
use crate::session::GameSession;

#[derive(Debug, Error)]
pub enum ProcedureError {
    #[error("item cap reached: {emitted} items emitted")]
    CapReached { emitted: u32 },
    #[error("item cap exhausted before the stop condition fired ({emitted} items)")]
    CapExhausted { emitted: u32 },
    #[error("no pending probe to classify")]
    NoPendingProbe,
    #[error(transparent)]
    Packing(#[from] PackingError),
}

/// Which size form the generator emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcedureMode {
    /// Sizes `ε·k^(-x)`.
    Small,
    /// Sizes `1 - ε·k^(-x)`.
    Large,
    /// Per-part alternation: odd parts emit `1 - k^(-x)`, even parts `k^(-x)`.
    SmallAndLarge,
}

/// Wire form of an emitted size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SizeForm {
    #[serde(rename = "a")]
    PowerOfK,
    #[serde(rename = "one-minus-a")]
    OneMinusPowerOfK,
}

/// The exponent binary search of one generator invocation.
#[derive(Debug, Clone)]
pub struct ProcedureState {
    k: u32,
    gap_multiplier: u64,
    cap: u32,
    emitted: u32,
    window_lo: BigUint,
    window_hi: BigUint,
    epsilon_exponent: BigUint,
    pending_probe: Option<BigUint>,
    history: Vec<(BigUint, SizeClass)>,
}

impl ProcedureState {
    /// Fresh search over `(B·2^(N+2), B·2^(N+3))` where `N = cap`.
    pub fn new(k: u32, cap: u32, epsilon_exponent: BigUint, config: &GapConfig) -> Self {
        assert!(config.validate(k), "gap multiplier too small for k={k}");
        let b = BigUint::from(config.gap_multiplier);
        ProcedureState {
            k,
            gap_multiplier: config.gap_multiplier,
            cap,
            emitted: 0,
            window_lo: &b << (cap + 2),
            window_hi: &b << (cap + 3),
            epsilon_exponent,
            pending_probe: None,
            history: Vec::new(),
        }
    }

    pub fn emitted(&self) -> u32 {
        self.emitted
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn window(&self) -> (&BigUint, &BigUint) {
        (&self.window_lo, &self.window_hi)
    }

    /// Midpoint probe for the next item. The caller must classify it via
    /// [`record_outcome`](Self::record_outcome) before asking again.
    pub fn next_probe(&mut self) -> Result<BigUint, ProcedureError> {
        if self.emitted >= self.cap {
            return Err(ProcedureError::CapReached {
                emitted: self.emitted,
            });
        }
        assert!(self.pending_probe.is_none(), "unclassified probe pending");
        let gap = &self.window_hi - &self.window_lo;
        let x = &self.window_lo + (&gap >> 1);
        self.pending_probe = Some(x.clone());
        Ok(x)
    }

    /// Narrows the window onto the pending probe: `Small` pulls the top
    /// down, `Large` pushes the bottom up. The gap halves exactly.
    pub fn record_outcome(&mut self, class: SizeClass) -> Result<(), ProcedureError> {
        let x = self
            .pending_probe
            .take()
            .ok_or(ProcedureError::NoPendingProbe)?;
        match class {
            SizeClass::Small => self.window_hi = x.clone(),
            SizeClass::Large => self.window_lo = x.clone(),
        }
        self.emitted += 1;
        self.history.push((x, class));
        self.check_invariants();
        Ok(())
    }

    /// The exponent of the emitted size: `E + x` for probe `x`.
    pub fn size_exponent(&self, probe: &BigUint) -> BigUint {
        &self.epsilon_exponent + probe
    }

    /// Window arithmetic and class separation, re-proved on live values.
    fn check_invariants(&self) {
        let b = BigUint::from(self.gap_multiplier);
        let gap = &self.window_hi - &self.window_lo;
        let expected = &b << (self.cap + 2 - self.emitted);
        assert_eq!(gap, expected, "window gap must halve exactly");
        let lo0 = &b << (self.cap + 2);
        let hi0 = &b << (self.cap + 3);
        for (i, (x, class)) in self.history.iter().enumerate() {
            assert!(*x > lo0 && *x < hi0, "probe {i} out of the initial window");
            assert!(
                (x % &b).bits() == 0,
                "probe {i} not a multiple of the gap multiplier"
            );
            match class {
                SizeClass::Small => assert!(*x >= self.window_hi),
                SizeClass::Large => assert!(*x <= self.window_lo),
            }
        }
        let distinct: std::collections::HashSet<_> =
            self.history.iter().map(|(x, _)| x.clone()).collect();
        assert_eq!(distinct.len(), self.history.len(), "probes must be distinct");
    }
}

/// One generated item as recorded in certificates.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TranscriptEntry {
    pub id: u64,
    /// Probe value `x` (decimal; already scaled by `B`).
    pub x: String,
    pub form: SizeForm,
    pub class: SizeClass,
    pub part: u64,
    #[serde(skip)]
    pub probe: BigUint,
    #[serde(skip)]
    pub exponent: BigUint,
    #[serde(skip)]
    pub new_bin: bool,
}

/// Ordered record of one generator invocation.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, class: SizeClass) -> u64 {
        self.entries.iter().filter(|e| e.class == class).count() as u64
    }

    pub fn count_in_part(&self, class: SizeClass, part: u64) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.class == class && e.part == part)
            .count() as u64
    }

    /// Smallest size exponent among entries of `class` — i.e. the largest
    /// `a`-value of that class.
    pub fn min_exponent(&self, class: SizeClass) -> Option<&BigUint> {
        self.entries
            .iter()
            .filter(|e| e.class == class)
            .map(|e| &e.exponent)
            .min()
    }

    /// Largest size exponent among entries of `class` — the smallest
    /// `a`-value of that class.
    pub fn max_exponent(&self, class: SizeClass) -> Option<&BigUint> {
        self.entries
            .iter()
            .filter(|e| e.class == class)
            .map(|e| &e.exponent)
            .max()
    }
}

/// What the per-part controller of `SmallAndLarge` decides after an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartAction {
    Stay,
    Advance,
    Stop,
}

/// The caller-supplied conditions of a generator run.
pub struct ConditionSpec<'a> {
    /// Total classification of each placement (`C1 -> Small`, `C2 -> Large`).
    pub classify: Box<dyn FnMut(PlacementDecision, &PackingState, u64) -> SizeClass + 'a>,
    /// Stop condition, evaluated after every placement.
    pub stop: Box<dyn FnMut(&Transcript) -> bool + 'a>,
    /// Part controller; `SmallAndLarge` only.
    pub advance: Option<Box<dyn FnMut(&Transcript, u64) -> PartAction + 'a>>,
    /// Exhausting the cap with the stop condition unmet is an error for
    /// runs whose analysis proves the stop fires first.
    pub cap_is_error: bool,
}

impl<'a> ConditionSpec<'a> {
    /// Runs to the cap; the stop condition never fires.
    pub fn run_to_cap(
        classify: impl FnMut(PlacementDecision, &PackingState, u64) -> SizeClass + 'a,
    ) -> Self {
        ConditionSpec {
            classify: Box::new(classify),
            stop: Box::new(|_| false),
            advance: None,
            cap_is_error: false,
        }
    }
}

/// Classification used by every first phase in this crate: opening a new
/// bin is the `Large` condition, joining a non-empty bin the `Small` one.
pub fn classify_openers_large() -> impl FnMut(PlacementDecision, &PackingState, u64) -> SizeClass {
    |decision, _state, _part| match decision {
        PlacementDecision::NewBin => SizeClass::Large,
        PlacementDecision::Existing(_) => SizeClass::Small,
    }
}

/// Generator configuration: mode, item cap and `ε = k^(-E)`.
pub struct ProcedureConfig {
    pub mode: ProcedureMode,
    pub cap: u32,
    pub epsilon_exponent: BigUint,
    pub phase: u32,
    pub gap: GapConfig,
}

impl ProcedureConfig {
    pub fn new(mode: ProcedureMode, cap: u32, epsilon_exponent: BigUint, phase: u32) -> Self {
        ProcedureConfig {
            mode,
            cap,
            epsilon_exponent,
            phase,
            gap: GapConfig::default(),
        }
    }
}

/// Plays one generator against the session's algorithm.
///
/// Stops when the stop condition fires or the cap is reached (an error if
/// the caller declared the stop must fire). For `SmallAndLarge` the part
/// controller is consulted after every item; parts start at 1.
pub fn run_procedure(
    cfg: &ProcedureConfig,
    session: &mut GameSession,
    conditions: &mut ConditionSpec<'_>,
) -> Result<Transcript, ProcedureError> {
    let k = session.k();
    let mut search = ProcedureState::new(k, cfg.cap, cfg.epsilon_exponent.clone(), &cfg.gap);
    let mut transcript = Transcript::default();
    let mut part: u64 = 1;

    loop {
        if (conditions.stop)(&transcript) {
            return Ok(transcript);
        }
        if search.emitted() >= cfg.cap {
            if conditions.cap_is_error {
                return Err(ProcedureError::CapExhausted {
                    emitted: search.emitted(),
                });
            }
            return Ok(transcript);
        }
        let probe = search.next_probe()?;
        let exponent = search.size_exponent(&probe);
        let form = match (cfg.mode, part % 2) {
            (ProcedureMode::Small, _) => SizeForm::PowerOfK,
            (ProcedureMode::Large, _) => SizeForm::OneMinusPowerOfK,
            (ProcedureMode::SmallAndLarge, 1) => SizeForm::OneMinusPowerOfK,
            (ProcedureMode::SmallAndLarge, _) => SizeForm::PowerOfK,
        };
        let size = match form {
            SizeForm::PowerOfK => SymbolicSize::power(k, exponent.clone()),
            SizeForm::OneMinusPowerOfK => SymbolicSize::power(k, exponent.clone()).one_minus(),
        };
        let tag = PhaseTag {
            phase: cfg.phase,
            part: matches!(cfg.mode, ProcedureMode::SmallAndLarge).then_some(part),
            class: None,
        };
        let classify = &mut conditions.classify;
        let (id, decision, _bin, class) = session.present_with(size, tag, |decision, state| {
            classify(decision, state, part)
        })?;
        search.record_outcome(class)?;
        transcript.entries.push(TranscriptEntry {
            id,
            x: probe.to_string(),
            form,
            class,
            part,
            probe,
            exponent,
            new_bin: matches!(decision, PlacementDecision::NewBin),
        });
        if let Some(advance) = conditions.advance.as_mut() {
            match advance(&transcript, part) {
                PartAction::Stay => {}
                PartAction::Advance => part += 1,
                PartAction::Stop => return Ok(transcript),
            }
        }
    }
}

/// `ε` exponent for runs that use `ε = 1`.
pub fn epsilon_one() -> BigUint {
    BigUint::ZERO
}

/// `E = B · 2^shift`, the scaled counterpart of `ε = k^(-2^shift)`.
pub fn scaled_epsilon_exponent(shift: u32, config: &GapConfig) -> BigUint {
    BigUint::from(config.gap_multiplier) << shift
}

/// Multiplicative separation between the classes of one transcript, in
/// exponent form: smallest `Small` exponent minus largest `Large` exponent.
/// Guaranteed to be at least `2B` whenever both classes occur.
pub fn class_gap(transcript: &Transcript) -> Option<BigUint> {
    let small_min = transcript.min_exponent(SizeClass::Small)?;
    let large_max = transcript.max_exponent(SizeClass::Large)?;
    assert!(small_min > large_max, "small items must stay below large ones");
    Some(small_min - large_max)
}

impl Transcript {
    fn _assert_one(_: &BigUint) {
        let _ = BigUint::one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms;

    fn b() -> u64 {
        GapConfig::default().gap_multiplier
    }

    #[test]
    fn probe_sequence_matches_update_rule() {
        // N=3: window (B*32, B*64), probes at B*48, then after outcomes.
        let mut st = ProcedureState::new(3, 3, BigUint::ZERO, &GapConfig::default());
        let x1 = st.next_probe().unwrap();
        assert_eq!(x1, BigUint::from(48 * b()));
        st.record_outcome(SizeClass::Large).unwrap(); // lo <- 48B
        let x2 = st.next_probe().unwrap();
        assert_eq!(x2, BigUint::from(56 * b()));
        st.record_outcome(SizeClass::Small).unwrap(); // hi <- 56B
        let x3 = st.next_probe().unwrap();
        assert_eq!(x3, BigUint::from(52 * b()));
    }

    #[test]
    fn window_updates() {
        let mut st = ProcedureState::new(2, 3, BigUint::ZERO, &GapConfig::default());
        let x = st.next_probe().unwrap();
        st.record_outcome(SizeClass::Small).unwrap();
        assert_eq!(st.window().1, &x);
        assert_eq!(st.window().0, &BigUint::from(32 * b()));

        let mut st = ProcedureState::new(2, 3, BigUint::ZERO, &GapConfig::default());
        let x = st.next_probe().unwrap();
        st.record_outcome(SizeClass::Large).unwrap();
        assert_eq!(st.window().0, &x);
        assert_eq!(st.window().1, &BigUint::from(64 * b()));
    }

    #[test]
    fn gap_halves_each_step() {
        let n = 6;
        let mut st = ProcedureState::new(3, n, BigUint::ZERO, &GapConfig::default());
        for i in 0..n {
            st.next_probe().unwrap();
            st.record_outcome(if i % 2 == 0 {
                SizeClass::Small
            } else {
                SizeClass::Large
            })
            .unwrap();
            let (lo, hi) = st.window();
            assert_eq!(hi - lo, BigUint::from(b()) << (n + 2 - (i + 1)));
        }
    }

    #[test]
    fn small_run_against_always_new_bin() {
        // Every item opens a bin => all Large; probes climb: 96,112,120,124 (xB).
        let alg = algorithms::from_spec("always-new-bin").unwrap();
        let mut session = GameSession::new(3, alg);
        let cfg = ProcedureConfig::new(ProcedureMode::Small, 4, epsilon_one(), 1);
        let mut cond = ConditionSpec::run_to_cap(classify_openers_large());
        let t = run_procedure(&cfg, &mut session, &mut cond).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.count(SizeClass::Large), 4);
        let probes: Vec<BigUint> = t.entries.iter().map(|e| e.probe.clone()).collect();
        let expected: Vec<BigUint> = [96u64, 112, 120, 124]
            .iter()
            .map(|v| BigUint::from(v * b()))
            .collect();
        assert_eq!(probes, expected);
    }

    #[test]
    fn small_run_against_join_first_bin() {
        struct JoinFirst;
        impl algorithms::OnlineAlgorithm for JoinFirst {
            fn name(&self) -> String {
                "join-first".into()
            }
            fn decide(
                &mut self,
                item: &crate::packing::Item,
                state: &PackingState,
            ) -> PlacementDecision {
                if state.bin_count() > 0 && state.placement_fits(0, item).unwrap_or(false) {
                    PlacementDecision::Existing(0)
                } else {
                    PlacementDecision::NewBin
                }
            }
            fn snapshot(&self) -> Box<dyn algorithms::OnlineAlgorithm> {
                Box::new(JoinFirst)
            }
        }
        let mut session = GameSession::new(4, Box::new(JoinFirst));
        let cfg = ProcedureConfig::new(ProcedureMode::Small, 4, epsilon_one(), 1);
        let mut cond = ConditionSpec::run_to_cap(classify_openers_large());
        let t = run_procedure(&cfg, &mut session, &mut cond).unwrap();
        let classes: Vec<SizeClass> = t.entries.iter().map(|e| e.class).collect();
        assert_eq!(
            classes,
            vec![
                SizeClass::Large,
                SizeClass::Small,
                SizeClass::Small,
                SizeClass::Small
            ]
        );
        let gap = class_gap(&t).unwrap();
        assert!(gap >= BigUint::from(2 * b()));
    }

    #[test]
    fn large_mode_emits_complements() {
        let alg = algorithms::from_spec("always-new-bin").unwrap();
        let mut session = GameSession::new(3, alg);
        let cfg = ProcedureConfig::new(ProcedureMode::Large, 2, epsilon_one(), 1);
        let mut cond = ConditionSpec::run_to_cap(
            |decision: PlacementDecision, _: &PackingState, _| match decision {
                PlacementDecision::NewBin => SizeClass::Small,
                _ => SizeClass::Large,
            },
        );
        let t = run_procedure(&cfg, &mut session, &mut cond).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.entries.iter().all(|e| e.form == SizeForm::OneMinusPowerOfK));
        for (item, entry) in session.items().iter().zip(&t.entries) {
            let expected = SymbolicSize::power(3, entry.exponent.clone()).one_minus();
            assert_eq!(item.size, expected);
        }
    }

    #[test]
    fn stop_condition_halts_run() {
        let alg = algorithms::from_spec("always-new-bin").unwrap();
        let mut session = GameSession::new(3, alg);
        let cfg = ProcedureConfig::new(ProcedureMode::Small, 10, epsilon_one(), 1);
        let mut cond = ConditionSpec {
            classify: Box::new(classify_openers_large()),
            stop: Box::new(|t: &Transcript| t.count(SizeClass::Large) >= 3),
            advance: None,
            cap_is_error: true,
        };
        let t = run_procedure(&cfg, &mut session, &mut cond).unwrap();
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn cap_exhaustion_is_error_when_declared() {
        let alg = algorithms::from_spec("always-new-bin").unwrap();
        let mut session = GameSession::new(3, alg);
        let cfg = ProcedureConfig::new(ProcedureMode::Small, 3, epsilon_one(), 1);
        let mut cond = ConditionSpec {
            classify: Box::new(classify_openers_large()),
            stop: Box::new(|t: &Transcript| t.count(SizeClass::Small) >= 1),
            advance: None,
            cap_is_error: true,
        };
        let err = run_procedure(&cfg, &mut session, &mut cond).unwrap_err();
        assert!(matches!(err, ProcedureError::CapExhausted { emitted: 3 }));
    }
}
