//! Trace events: the sole channel between the interpreter and every analysis.
//!
//! One event is emitted per executed opcode, before its effects. Events are
//! read-only to consumers; the interpreter patches call outcomes into its own
//! copy after the child frame completes, so `ExecResult::trace` carries final
//! information while streaming hooks see `success: None` on pending calls.

use crate::evm::opcode;
use crate::evm::world::Address;
use crate::word::{self, Word};

/// Value provenance, tracked per stack slot, memory word and storage key.
#[derive(Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Taint(u8);

impl Taint {
    pub const NONE: Taint = Taint(0);
    pub const TIMESTAMP: Taint = Taint(1);
    pub const BLOCK_NUMBER: Taint = Taint(1 << 1);
    pub const CALLDATA: Taint = Taint(1 << 2);
    /// Outcome flag of a CALL; lets the Gasless Send oracle see whether the
    /// flag was ever consumed by a JUMPI.
    pub const CALL_RESULT: Taint = Taint(1 << 3);

    pub fn union(self, other: Taint) -> Taint {
        Taint(self.0 | other.0)
    }

    pub fn contains(self, other: Taint) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Debug for Taint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "-");
        }
        let mut parts = Vec::new();
        if self.contains(Taint::TIMESTAMP) {
            parts.push("ts");
        }
        if self.contains(Taint::BLOCK_NUMBER) {
            parts.push("bn");
        }
        if self.contains(Taint::CALLDATA) {
            parts.push("cd");
        }
        if self.contains(Taint::CALL_RESULT) {
            parts.push("cr");
        }
        write!(f, "{}", parts.join("+"))
    }
}

/// Comparison relation a predicate tag was produced by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredOp {
    Eq,
    Lt,
    Gt,
    Slt,
    Sgt,
}

/// Provenance of a comparison result: the relation and its operands, with a
/// count of ISZERO applications since.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateTag {
    pub op: PredOp,
    pub a: Word,
    pub b: Word,
    pub negations: u8,
}

impl PredicateTag {
    /// The raw relation on (a, b), before negation parity.
    pub fn relation_holds(&self) -> bool {
        match self.op {
            PredOp::Eq => self.a == self.b,
            PredOp::Lt => self.a < self.b,
            PredOp::Gt => self.a > self.b,
            PredOp::Slt => word::slt(self.a, self.b),
            PredOp::Sgt => word::sgt(self.a, self.b),
        }
    }

    /// The boolean this tag's slot should hold, after negation parity.
    pub fn evaluate(&self) -> bool {
        self.relation_holds() ^ (self.negations % 2 == 1)
    }
}

/// One stack entry: a word plus its provenance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StackSlot {
    pub value: Word,
    pub predicate: Option<Box<PredicateTag>>,
    pub taint: Taint,
}

impl StackSlot {
    pub fn plain(value: Word) -> Self {
        StackSlot {
            value,
            predicate: None,
            taint: Taint::NONE,
        }
    }

    pub fn tainted(value: Word, taint: Taint) -> Self {
        StackSlot {
            value,
            predicate: None,
            taint,
        }
    }
}

/// Up to the four topmost stack slots at the moment an opcode executed;
/// index 0 is the top of the stack.
#[derive(Clone, Debug, Default)]
pub struct StackHead {
    pub len: u8,
    pub slots: [StackSlot; 4],
}

impl StackHead {
    pub fn get(&self, i: usize) -> Option<&StackSlot> {
        if i < self.len as usize {
            Some(&self.slots[i])
        } else {
            None
        }
    }
}

/// Opcode-specific payload.
#[derive(Clone, Debug, Default)]
pub enum EventAux {
    #[default]
    None,
    Jumpi {
        target: u32,
        taken: bool,
    },
    Call {
        delegate: bool,
        callee: Address,
        value: Word,
        forwarded_gas: u64,
        /// None while streaming (child not yet run); patched in the stored trace.
        success: Option<bool>,
        /// Taint of the target-address slot.
        target_taint: Taint,
    },
    Sstore {
        key: Word,
        value: Word,
        taint: Taint,
    },
    Create {
        address: Address,
        success: Option<bool>,
    },
    Selfdestruct {
        beneficiary: Address,
    },
}

/// One executed opcode.
#[derive(Clone, Debug)]
pub struct TraceEvent {
    pub pc: u32,
    pub opcode: u8,
    pub gas_remaining: u64,
    pub depth: u8,
    pub stack_head: StackHead,
    pub aux: EventAux,
}

impl TraceEvent {
    /// Tab-separated dump line: `depth pc opcode gas stack0..3`.
    pub fn dump_line(&self) -> String {
        let mut line = format!(
            "{}\t{}\t{}\t{}",
            self.depth,
            self.pc,
            opcode::name(self.opcode),
            self.gas_remaining
        );
        for i in 0..4 {
            match self.stack_head.get(i) {
                Some(slot) => line.push_str(&format!("\t{}", word::to_hex(slot.value))),
                None => line.push_str("\t-"),
            }
        }
        line
    }
}

/// How a frame ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExecStatus {
    Success,
    Revert,
    Exception,
}

/// Status of one internal call, in order of frame entry.
#[derive(Clone, Debug)]
pub struct NestedCall {
    /// Index of the CALL/DELEGATECALL/CREATE event in the trace.
    pub event_index: usize,
    pub depth: u8,
    pub callee: Address,
    pub delegate: bool,
    pub status: ExecStatus,
}

/// Everything one message execution produced.
#[derive(Clone, Debug)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub return_data: Vec<u8>,
    pub gas_used: u64,
    pub trace: Vec<TraceEvent>,
    /// Per-internal-call statuses; a nested failure does not fail the parent.
    pub nested: Vec<NestedCall>,
}

impl ExecResult {
    pub fn is_success(&self) -> bool {
        self.status == ExecStatus::Success
    }
}

/// Which code a frame is running.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum CodePhase {
    /// Constructor (init) code.
    Init,
    /// Deployed runtime code.
    Runtime,
}

/// Frame context handed to hooks on entry.
#[derive(Clone, Debug)]
pub struct FrameInfo {
    /// Storage/identity context of the frame.
    pub address: Address,
    /// Account whose code is running (differs from `address` under DELEGATECALL).
    pub code_address: Address,
    pub depth: u8,
    pub is_delegate: bool,
    pub phase: CodePhase,
}

/// Streaming consumer of execution events.
///
/// All callbacks default to no-ops so consumers implement only what they use.
pub trait EventHook {
    fn frame_enter(&mut self, _info: &FrameInfo) {}
    fn event(&mut self, _ev: &TraceEvent) {}
    fn frame_exit(&mut self, _status: ExecStatus) {}
}

/// Hook that ignores everything; the baseline for overhead measurement.
#[derive(Default)]
pub struct NoopHook;

impl EventHook for NoopHook {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taint_union_and_contains() {
        let t = Taint::TIMESTAMP.union(Taint::CALLDATA);
        assert!(t.contains(Taint::TIMESTAMP));
        assert!(t.contains(Taint::CALLDATA));
        assert!(!t.contains(Taint::BLOCK_NUMBER));
        assert!(Taint::NONE.is_empty());
    }

    #[test]
    fn predicate_negation_parity() {
        let tag = PredicateTag {
            op: PredOp::Eq,
            a: Word::from(5u8),
            b: Word::from(5u8),
            negations: 0,
        };
        assert!(tag.evaluate());
        let negated = PredicateTag {
            negations: 1,
            ..tag.clone()
        };
        assert!(!negated.evaluate());
        let double = PredicateTag {
            negations: 2,
            ..tag
        };
        assert!(double.evaluate());
    }

    #[test]
    fn dump_line_shape() {
        let ev = TraceEvent {
            pc: 7,
            opcode: opcode::ADD,
            gas_remaining: 99,
            depth: 1,
            stack_head: StackHead {
                len: 1,
                slots: [
                    StackSlot::plain(Word::from(3u8)),
                    StackSlot::default(),
                    StackSlot::default(),
                    StackSlot::default(),
                ],
            },
            aux: EventAux::None,
        };
        let line = ev.dump_line();
        assert!(line.starts_with("1\t7\tADD\t99\t0x"));
        assert!(line.ends_with("\t-\t-\t-"));
    }
}
