//! On-the-fly CFG recovery from JUMPI events, the covered / just-missed
//! branch registry, and branch-distance computation.
//!
//! Static CFG construction is out: jump targets live on the stack, so the
//! graph is grown while fuzzing. Whenever a JUMPI executes, both destinations
//! are recorded; the taken edge becomes covered.

use std::collections::{BTreeMap, BTreeSet};

use crate::evm::trace::{CodePhase, EventAux, PredOp, PredicateTag, TraceEvent};
use crate::evm::world::Address;
use crate::word::{Word, U512};

/// Minimum distance: the value reported when a branch is (or is about to be)
/// covered.
pub const K: u64 = 1;

/// One outgoing edge of a JUMPI. Constructor-code branches carry their own
/// phase so runtime pcs never collide with init pcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Branch {
    pub contract: Address,
    pub phase: CodePhase,
    pub source_pc: u32,
    pub dest_pc: u32,
}

impl Branch {
    pub fn sibling_of(&self, other: &Branch) -> bool {
        self.contract == other.contract
            && self.phase == other.phase
            && self.source_pc == other.source_pc
            && self.dest_pc != other.dest_pc
    }
}

/// Per-execution minimum distance observed for each just-missed branch.
#[derive(Clone, Debug, Default)]
pub struct DistanceReport {
    distances: BTreeMap<Branch, U512>,
}

impl DistanceReport {
    pub fn fold_min(&mut self, branch: Branch, d: U512) {
        debug_assert!(d >= U512::from(K));
        self.distances
            .entry(branch)
            .and_modify(|cur| {
                if d < *cur {
                    *cur = d;
                }
            })
            .or_insert(d);
    }

    pub fn get(&self, branch: &Branch) -> Option<U512> {
        self.distances.get(branch).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Branch, &U512)> {
        self.distances.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }
}

/// Campaign-wide branch knowledge: everything discovered, everything covered,
/// and the best (distance, seed) per just-missed branch.
#[derive(Clone, Debug, Default)]
pub struct BranchRegistry {
    known: BTreeSet<Branch>,
    covered: BTreeSet<Branch>,
    best: BTreeMap<Branch, (U512, u64)>,
}

impl BranchRegistry {
    pub fn known(&self) -> &BTreeSet<Branch> {
        &self.known
    }

    pub fn covered(&self) -> &BTreeSet<Branch> {
        &self.covered
    }

    pub fn is_covered(&self, b: &Branch) -> bool {
        self.covered.contains(b)
    }

    pub fn known_count(&self) -> usize {
        self.known.len()
    }

    pub fn covered_count(&self) -> usize {
        self.covered.len()
    }

    /// Best (distance, seed id) recorded so far for a just-missed branch.
    pub fn best(&self, b: &Branch) -> Option<(U512, u64)> {
        self.best.get(b).copied()
    }

    /// Records a candidate (distance, seed); kept only on strict improvement,
    /// so the earliest seed wins ties and best distances never increase.
    /// Covered branches take no best entries.
    pub fn offer_best(&mut self, branch: Branch, d: U512, seed_id: u64) {
        if self.covered.contains(&branch) {
            return;
        }
        match self.best.get_mut(&branch) {
            Some((cur, cur_seed)) => {
                if d < *cur {
                    *cur = d;
                    *cur_seed = seed_id;
                }
            }
            None => {
                self.best.insert(branch, (d, seed_id));
            }
        }
    }

    /// Registers both destinations of an executed JUMPI, marks the taken edge
    /// covered, and folds a distance for the sibling when it is just-missed
    /// and the condition slot carries a predicate tag.
    ///
    /// Returns the branch newly covered by this event, if any.
    pub fn observe_jumpi(
        &mut self,
        contract: Address,
        phase: CodePhase,
        ev: &TraceEvent,
        report: &mut DistanceReport,
    ) -> Option<Branch> {
        let EventAux::Jumpi { target, taken } = ev.aux else {
            return None;
        };
        let fallthrough = ev.pc + 1;
        let (taken_dest, missed_dest) = if taken {
            (target, fallthrough)
        } else {
            (fallthrough, target)
        };
        let taken_branch = Branch {
            contract,
            phase,
            source_pc: ev.pc,
            dest_pc: taken_dest,
        };
        let missed_branch = Branch {
            contract,
            phase,
            source_pc: ev.pc,
            dest_pc: missed_dest,
        };
        self.known.insert(taken_branch);
        self.known.insert(missed_branch);
        let newly_covered = self.covered.insert(taken_branch);
        // A covered branch needs no best entry.
        self.best.remove(&taken_branch);

        if !self.covered.contains(&missed_branch) {
            // Sibling is now just-missed; compute how far this execution was
            // from taking it.
            if let Some(slot) = ev.stack_head.get(1) {
                if let Some(tag) = &slot.predicate {
                    report.fold_min(missed_branch, distance(tag, !taken));
                }
            }
        }
        newly_covered.then_some(taken_branch)
    }

    /// Uncovered branches whose sibling is covered.
    pub fn just_missed(&self) -> Vec<Branch> {
        self.known
            .iter()
            .filter(|b| !self.covered.contains(b))
            .filter(|b| {
                self.covered
                    .range(
                        Branch {
                            dest_pc: 0,
                            ..**b
                        }..=Branch {
                            dest_pc: u32::MAX,
                            ..**b
                        },
                    )
                    .any(|c| c.sibling_of(b))
            })
            .copied()
            .collect()
    }

    /// DOT digraph of the discovered CFG with coverage coloring.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n");
        let just_missed: BTreeSet<Branch> = self.just_missed().into_iter().collect();
        for b in &self.known {
            let color = if self.covered.contains(b) {
                "green"
            } else if just_missed.contains(b) {
                "red"
            } else {
                "gray"
            };
            let ns = match b.phase {
                CodePhase::Init => "init",
                CodePhase::Runtime => "rt",
            };
            let c = &b.contract.to_hex()[chop(&b.contract)..];
            out.push_str(&format!(
                "  \"{c}:{ns}:{src}\" -> \"{c}:{ns}:{dst}\" [color={color}];\n",
                src = b.source_pc,
                dst = b.dest_pc,
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn chop(_a: &Address) -> usize {
    // keep the last 8 hex chars of the address in labels
    34
}

/// Streaming event consumer that feeds the registry: tracks the frame stack
/// to attribute JUMPI events to the right contract and code phase, and
/// collects this execution's newly covered branches and distance report.
pub struct CoverageHook<'a> {
    pub registry: &'a mut BranchRegistry,
    pub report: &'a mut DistanceReport,
    pub newly_covered: &'a mut Vec<Branch>,
    frames: Vec<(Address, CodePhase)>,
}

impl<'a> CoverageHook<'a> {
    pub fn new(
        registry: &'a mut BranchRegistry,
        report: &'a mut DistanceReport,
        newly_covered: &'a mut Vec<Branch>,
    ) -> Self {
        CoverageHook {
            registry,
            report,
            newly_covered,
            frames: Vec::new(),
        }
    }
}

impl crate::evm::trace::EventHook for CoverageHook<'_> {
    fn frame_enter(&mut self, info: &crate::evm::trace::FrameInfo) {
        // branch identity follows the code being run, not the storage context
        self.frames.push((info.code_address, info.phase));
    }

    fn event(&mut self, ev: &TraceEvent) {
        if ev.opcode != crate::evm::opcode::JUMPI {
            return;
        }
        let Some((contract, phase)) = self.frames.last().copied() else {
            return;
        };
        if let Some(b) = self.registry.observe_jumpi(contract, phase, ev, self.report) {
            self.newly_covered.push(b);
        }
    }

    fn frame_exit(&mut self, _status: crate::evm::trace::ExecStatus) {
        self.frames.pop();
    }
}

/// The piecewise branch-distance function, computed in 512-bit integers so
/// 2^256 wraparound cannot corrupt closeness; clamped below at K.
///
/// `wanted` is the outcome of the tag's *relation chain* (including ISZERO
/// parity) that would cover the just-missed branch.
pub fn distance(tag: &PredicateTag, wanted: bool) -> U512 {
    let negated = tag.negations % 2 == 1;
    let want_relation = wanted ^ negated;
    let (a, b) = match tag.op {
        PredOp::Slt | PredOp::Sgt => (bias_signed(tag.a), bias_signed(tag.b)),
        _ => (widen(tag.a), widen(tag.b)),
    };
    let k = U512::from(K);
    match (tag.op, want_relation) {
        // want a == b
        (PredOp::Eq, true) => abs_diff(a, b) + k,
        // want a != b
        (PredOp::Eq, false) => k,
        // want a < b (surplus of a over b must shrink)
        (PredOp::Lt, true) | (PredOp::Slt, true) => surplus(a, b) + k,
        // want a >= b
        (PredOp::Lt, false) | (PredOp::Slt, false) => surplus(b, a) + k,
        // want a > b
        (PredOp::Gt, true) | (PredOp::Sgt, true) => surplus(b, a) + k,
        // want a <= b
        (PredOp::Gt, false) | (PredOp::Sgt, false) => surplus(a, b) + k,
    }
}

fn widen(w: Word) -> U512 {
    let mut bytes = [0u8; 32];
    w.to_big_endian(&mut bytes);
    U512::from_big_endian(&bytes)
}

/// Order-preserving map from two's-complement words to unsigned values:
/// flipping the sign bit preserves all pairwise differences.
fn bias_signed(w: Word) -> U512 {
    widen(w ^ (Word::one() << 255))
}

fn abs_diff(a: U512, b: U512) -> U512 {
    if a >= b {
        a - b
    } else {
        b - a
    }
}

/// `a - b` when positive, zero otherwise.
fn surplus(a: U512, b: U512) -> U512 {
    if a > b {
        a - b
    } else {
        U512::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::trace::{StackHead, StackSlot};
    use crate::word;

    fn tag(op: PredOp, a: u64, b: u64) -> PredicateTag {
        PredicateTag {
            op,
            a: Word::from(a),
            b: Word::from(b),
            negations: 0,
        }
    }

    fn jumpi_event(pc: u32, target: u32, taken: bool, tag: Option<PredicateTag>) -> TraceEvent {
        let mut head = StackHead::default();
        head.len = 2;
        head.slots[0] = StackSlot::plain(Word::from(target));
        head.slots[1] = StackSlot {
            value: if taken { Word::one() } else { Word::zero() },
            predicate: tag.map(Box::new),
            taint: Default::default(),
        };
        TraceEvent {
            pc,
            opcode: crate::evm::opcode::JUMPI,
            gas_remaining: 1000,
            depth: 0,
            stack_head: head,
            aux: EventAux::Jumpi { target, taken },
        }
    }

    fn contract() -> Address {
        Address::low(0xf0)
    }

    #[test]
    fn first_jumpi_registers_two_branches_and_covers_one() {
        let mut reg = BranchRegistry::default();
        let mut report = DistanceReport::default();
        let ev = jumpi_event(40, 77, true, None);
        let covered = reg.observe_jumpi(contract(), CodePhase::Runtime, &ev, &mut report);
        assert_eq!(reg.known_count(), 2);
        assert_eq!(reg.covered_count(), 1);
        assert_eq!(
            covered,
            Some(Branch {
                contract: contract(),
                phase: CodePhase::Runtime,
                source_pc: 40,
                dest_pc: 77,
            })
        );
        assert_eq!(reg.just_missed().len(), 1);
        assert_eq!(reg.just_missed()[0].dest_pc, 41);
    }

    #[test]
    fn eq_false_distance_follows_the_formula() {
        // condition EQ(a=200, b=100) evaluated false; true-branch just-missed
        let mut reg = BranchRegistry::default();
        let mut report = DistanceReport::default();
        // The JUMPI guards the then-branch: condition false means not taken.
        let ev = jumpi_event(10, 50, false, Some(tag(PredOp::Eq, 200, 100)));
        reg.observe_jumpi(contract(), CodePhase::Runtime, &ev, &mut report);
        let missed = Branch {
            contract: contract(),
            phase: CodePhase::Runtime,
            source_pc: 10,
            dest_pc: 50,
        };
        assert_eq!(report.get(&missed), Some(U512::from(101u32)));
    }

    #[test]
    fn eq_satisfied_covers_and_reports_nothing() {
        // condition EQ(100, 100): branch taken and covered; a covered branch
        // needs no report entry
        let mut reg = BranchRegistry::default();
        let mut report = DistanceReport::default();
        let ev = jumpi_event(10, 50, true, Some(tag(PredOp::Eq, 100, 100)));
        reg.observe_jumpi(contract(), CodePhase::Runtime, &ev, &mut report);
        let then_branch = Branch {
            contract: contract(),
            phase: CodePhase::Runtime,
            source_pc: 10,
            dest_pc: 50,
        };
        assert!(reg.is_covered(&then_branch));
        assert_eq!(report.get(&then_branch), None);
    }

    #[test]
    fn distance_formula_examples() {
        assert_eq!(distance(&tag(PredOp::Eq, 200, 100), true), U512::from(101u32));
        assert_eq!(distance(&tag(PredOp::Gt, 5, 10), true), U512::from(6u32));
        // already satisfied: K floor
        assert_eq!(distance(&tag(PredOp::Gt, 10, 5), true), U512::from(1u32));
        assert_eq!(distance(&tag(PredOp::Eq, 7, 7), true), U512::from(1u32));
        assert_eq!(distance(&tag(PredOp::Eq, 7, 9), false), U512::from(1u32));
        assert_eq!(distance(&tag(PredOp::Lt, 9, 4), true), U512::from(6u32));
    }

    #[test]
    fn negation_parity_flips_the_wanted_outcome() {
        let mut t = tag(PredOp::Eq, 200, 100);
        t.negations = 1;
        // Wanting the negated tag true means wanting a != b: already holds.
        assert_eq!(distance(&t, true), U512::from(1u32));
        // Wanting it false means wanting a == b.
        assert_eq!(distance(&t, false), U512::from(101u32));
    }

    #[test]
    fn signed_distance_uses_twos_complement_order() {
        // a = -3, b = 5 under SLT: want a < b already holds
        let t = PredicateTag {
            op: PredOp::Slt,
            a: word::neg(Word::from(3u8)),
            b: Word::from(5u8),
            negations: 0,
        };
        assert_eq!(distance(&t, true), U512::from(1u32));
        // want a >= b: need to raise -3 past 5, surplus is 8
        assert_eq!(distance(&t, false), U512::from(9u32));
    }

    #[test]
    fn no_wraparound_for_extreme_operands() {
        let t = PredicateTag {
            op: PredOp::Eq,
            a: Word::MAX,
            b: Word::zero(),
            negations: 0,
        };
        assert_eq!(distance(&t, true), widen(Word::MAX) + U512::from(1u32));
    }

    #[test]
    fn just_missed_requires_covered_sibling() {
        let mut reg = BranchRegistry::default();
        assert!(reg.just_missed().is_empty());
        let mut report = DistanceReport::default();
        reg.observe_jumpi(
            contract(),
            CodePhase::Runtime,
            &jumpi_event(10, 50, false, None),
            &mut report,
        );
        assert_eq!(reg.just_missed().len(), 1);
        // exercise the other outcome: nothing just-missed at this node anymore
        reg.observe_jumpi(
            contract(),
            CodePhase::Runtime,
            &jumpi_event(10, 50, true, None),
            &mut report,
        );
        assert!(reg.just_missed().is_empty());
    }

    #[test]
    fn registry_only_grows() {
        let mut reg = BranchRegistry::default();
        let mut report = DistanceReport::default();
        let mut seen_known = 0;
        let mut seen_covered = 0;
        let events = [
            (10u32, 50u32, false),
            (10, 50, true),
            (60, 80, true),
            (10, 50, false),
            (90, 120, false),
        ];
        for (pc, target, taken) in events {
            reg.observe_jumpi(
                contract(),
                CodePhase::Runtime,
                &jumpi_event(pc, target, taken, None),
                &mut report,
            );
            assert!(reg.known_count() >= seen_known);
            assert!(reg.covered_count() >= seen_covered);
            seen_known = reg.known_count();
            seen_covered = reg.covered_count();
            for c in reg.covered() {
                assert!(reg.known().contains(c));
            }
        }
    }

    #[test]
    fn init_and_runtime_pcs_do_not_collide() {
        let mut reg = BranchRegistry::default();
        let mut report = DistanceReport::default();
        reg.observe_jumpi(
            contract(),
            CodePhase::Init,
            &jumpi_event(10, 50, true, None),
            &mut report,
        );
        reg.observe_jumpi(
            contract(),
            CodePhase::Runtime,
            &jumpi_event(10, 50, true, None),
            &mut report,
        );
        assert_eq!(reg.known_count(), 4);
        assert_eq!(reg.covered_count(), 2);
    }

    #[test]
    fn best_entries_keep_earliest_seed_on_ties() {
        let mut reg = BranchRegistry::default();
        let b = Branch {
            contract: contract(),
            phase: CodePhase::Runtime,
            source_pc: 1,
            dest_pc: 2,
        };
        reg.offer_best(b, U512::from(50u32), 7);
        reg.offer_best(b, U512::from(50u32), 8);
        assert_eq!(reg.best(&b), Some((U512::from(50u32), 7)));
        reg.offer_best(b, U512::from(49u32), 9);
        assert_eq!(reg.best(&b), Some((U512::from(49u32), 9)));
        reg.offer_best(b, U512::from(60u32), 10);
        assert_eq!(reg.best(&b), Some((U512::from(49u32), 9)));
    }

    // Independent oracle: scan candidate a' values near a and return
    // K + the minimal |perturbation| achieving the wanted outcome.
    fn brute_force_eq_distance(a: u64, b: u64, wanted: bool) -> Option<u64> {
        for delta in 0..=1024u64 {
            for cand in [a.checked_sub(delta), a.checked_add(delta)] {
                let Some(cand) = cand else { continue };
                if (cand == b) == wanted {
                    return Some(K + delta);
                }
            }
        }
        None
    }

    #[test]
    fn distance_matches_brute_force_oracle_on_small_operands() {
        // deterministic pseudo-random small tuples
        let mut x: u64 = 0x9e3779b97f4a7c15;
        for _ in 0..500 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (x >> 11) % 512;
            let b = (x >> 37) % 512;
            let wanted = x & 1 == 0;
            if !wanted && a == b {
                // The piecewise formula pins `a != b` at the constant K even
                // when the relation does not hold yet; the perturbation
                // oracle would say K + 1 here.
                assert_eq!(distance(&tag(PredOp::Eq, a, b), wanted), U512::from(K));
                continue;
            }
            let expected = brute_force_eq_distance(a, b, wanted).unwrap();
            let got = distance(&tag(PredOp::Eq, a, b), wanted);
            assert_eq!(
                got,
                U512::from(expected),
                "distance mismatch for EQ({a},{b}) wanted={wanted}"
            );
        }
    }

    #[test]
    fn dot_dump_mentions_every_branch() {
        let mut reg = BranchRegistry::default();
        let mut report = DistanceReport::default();
        reg.observe_jumpi(
            contract(),
            CodePhase::Runtime,
            &jumpi_event(10, 50, true, None),
            &mut report,
        );
        let dot = reg.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains(":10\" -> "));
        assert!(dot.contains("color=green"));
        assert!(dot.contains("color=red"));
    }
}
