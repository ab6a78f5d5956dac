//! Vulnerability detection over batched execution logs, offline from the
//! fuzzing loop.
//!
//! Every oracle is a predicate over one transaction's trace except Freezing
//! Ether, which is evaluated once per campaign and is always a warning: a
//! send path may exist that no generated test case ever covered.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::evm::opcode;
use crate::evm::trace::{EventAux, ExecResult, ExecStatus, Taint};
use crate::evm::world::Address;
use crate::word::Word;

pub const DEFAULT_BATCH_SIZE: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OracleId {
    GaslessSend,
    ExceptionDisorder,
    Reentrancy,
    TimestampDependency,
    BlockNumberDependency,
    DangerousDelegateCall,
    IntegerOverflow,
    IntegerUnderflow,
    FreezingEther,
}

impl OracleId {
    pub const ALL: [OracleId; 9] = [
        OracleId::GaslessSend,
        OracleId::ExceptionDisorder,
        OracleId::Reentrancy,
        OracleId::TimestampDependency,
        OracleId::BlockNumberDependency,
        OracleId::DangerousDelegateCall,
        OracleId::IntegerOverflow,
        OracleId::IntegerUnderflow,
        OracleId::FreezingEther,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleId::GaslessSend => "GaslessSend",
            OracleId::ExceptionDisorder => "ExceptionDisorder",
            OracleId::Reentrancy => "Reentrancy",
            OracleId::TimestampDependency => "TimestampDependency",
            OracleId::BlockNumberDependency => "BlockNumberDependency",
            OracleId::DangerousDelegateCall => "DangerousDelegateCall",
            OracleId::IntegerOverflow => "IntegerOverflow",
            OracleId::IntegerUnderflow => "IntegerUnderflow",
            OracleId::FreezingEther => "FreezingEther",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Definite,
    Warning,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VulnerabilityReport {
    pub oracle: OracleId,
    pub test_case_id: u64,
    /// Which call of the test case triggered (0 = constructor).
    pub call_index: usize,
    /// Event index range into that call's trace.
    pub evidence: Range<usize>,
    pub confidence: Confidence,
    /// How many executions triggered this oracle over the campaign.
    pub occurrences: u64,
}

/// One call's log: the transferred value and the execution result.
#[derive(Clone, Debug)]
pub struct CallLog {
    pub value: Word,
    pub result: ExecResult,
}

/// Logs of one executed test case, constructor first.
#[derive(Clone, Debug)]
pub struct LogEntry {
    pub test_case_id: u64,
    pub calls: Vec<CallLog>,
}

/// Up to `cap` test-case logs checked together.
#[derive(Clone, Debug)]
pub struct LogBatch {
    pub entries: Vec<LogEntry>,
    pub cap: usize,
}

impl LogBatch {
    pub fn new(cap: usize) -> Self {
        LogBatch {
            entries: Vec::new(),
            cap,
        }
    }

    pub fn push(&mut self, entry: LogEntry) -> bool {
        debug_assert!(self.entries.len() < self.cap);
        self.entries.push(entry);
        self.entries.len() >= self.cap
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Campaign facts the per-trace predicates need.
#[derive(Clone, Debug)]
pub struct OracleContext {
    pub contract: Address,
    pub reentrancy_loaded: bool,
}

/// A firing: oracle, call index, evidence window.
type Finding = (OracleId, usize, Range<usize>);

/// Runs every per-transaction oracle over one batch. Freezing Ether is not
/// checked here; it needs campaign-end facts.
pub fn check_batch(batch: &LogBatch, ctx: &OracleContext) -> Vec<(u64, Finding)> {
    let mut findings = Vec::new();
    for entry in &batch.entries {
        for (call_index, call) in entry.calls.iter().enumerate() {
            for f in check_transaction(&call.result, ctx) {
                findings.push((entry.test_case_id, (f.0, call_index, f.1)));
            }
        }
    }
    findings
}

fn check_transaction(result: &ExecResult, ctx: &OracleContext) -> Vec<(OracleId, Range<usize>)> {
    let mut out = Vec::new();
    if let Some(ev) = gasless_send(result) {
        out.push((OracleId::GaslessSend, ev));
    }
    if let Some(ev) = exception_disorder(result) {
        out.push((OracleId::ExceptionDisorder, ev));
    }
    if ctx.reentrancy_loaded {
        if let Some(ev) = reentrancy(result, ctx.contract) {
            out.push((OracleId::Reentrancy, ev));
        }
    }
    if let Some(ev) = dependency(result, Taint::TIMESTAMP) {
        out.push((OracleId::TimestampDependency, ev));
    }
    if let Some(ev) = dependency(result, Taint::BLOCK_NUMBER) {
        out.push((OracleId::BlockNumberDependency, ev));
    }
    if let Some(ev) = dangerous_delegate_call(result) {
        out.push((OracleId::DangerousDelegateCall, ev));
    }
    if let Some(ev) = integer_overflow(result) {
        out.push((OracleId::IntegerOverflow, ev));
    }
    if let Some(ev) = integer_underflow(result) {
        out.push((OracleId::IntegerUnderflow, ev));
    }
    out
}

/// A value-bearing CALL carrying exactly the 2300-gas stipend failed and its
/// success flag was never consumed by any JUMPI of the transaction.
pub fn gasless_send(result: &ExecResult) -> Option<Range<usize>> {
    let flag_checked = result.trace.iter().any(|ev| {
        ev.opcode == opcode::JUMPI
            && ev
                .stack_head
                .get(1)
                .is_some_and(|slot| slot.taint.contains(Taint::CALL_RESULT))
    });
    if flag_checked {
        return None;
    }
    for (i, ev) in result.trace.iter().enumerate() {
        if let EventAux::Call {
            delegate: false,
            value,
            forwarded_gas,
            success: Some(false),
            ..
        } = &ev.aux
        {
            if !value.is_zero() && *forwarded_gas == 2300 {
                return Some(i..i + 1);
            }
        }
    }
    None
}

/// Some internal call frame failed while the outermost frame succeeded.
pub fn exception_disorder(result: &ExecResult) -> Option<Range<usize>> {
    if result.status != ExecStatus::Success {
        return None;
    }
    result
        .nested
        .iter()
        .find(|n| n.status != ExecStatus::Success)
        .map(|n| n.event_index..n.event_index + 1)
}

/// The contract under test re-entered at depth >= 2 before its outer frame
/// completed, and the re-entered execution reached an SSTORE or a
/// value-transferring CALL.
pub fn reentrancy(result: &ExecResult, contract: Address) -> Option<Range<usize>> {
    for n in &result.nested {
        if n.callee != contract || n.delegate || n.depth < 2 {
            continue;
        }
        // events of the re-entered frame: from its first event until depth
        // drops back below the frame's depth
        let mut end = n.event_index;
        for (i, ev) in result.trace.iter().enumerate().skip(n.event_index) {
            if ev.depth < n.depth {
                break;
            }
            end = i + 1;
            let state_changing = ev.opcode == opcode::SSTORE
                || matches!(
                    &ev.aux,
                    EventAux::Call {
                        delegate: false,
                        value,
                        ..
                    } if !value.is_zero()
                );
            if state_changing {
                return Some(n.event_index..end);
            }
        }
    }
    None
}

/// A JUMPI condition carries the given environment taint and the same
/// transaction executes a value-bearing CALL.
pub fn dependency(result: &ExecResult, origin: Taint) -> Option<Range<usize>> {
    let jumpi = result.trace.iter().position(|ev| {
        ev.opcode == opcode::JUMPI
            && ev
                .stack_head
                .get(1)
                .is_some_and(|slot| slot.taint.contains(origin))
    })?;
    let call = result.trace.iter().position(|ev| {
        matches!(
            &ev.aux,
            EventAux::Call {
                delegate: false,
                value,
                ..
            } if !value.is_zero()
        )
    })?;
    Some(jumpi.min(call)..jumpi.max(call) + 1)
}

/// A DELEGATECALL whose target address derives from call data.
pub fn dangerous_delegate_call(result: &ExecResult) -> Option<Range<usize>> {
    result
        .trace
        .iter()
        .position(|ev| {
            matches!(
                &ev.aux,
                EventAux::Call {
                    delegate: true,
                    target_taint,
                    ..
                } if target_taint.contains(Taint::CALLDATA)
            )
        })
        .map(|i| i..i + 1)
}

/// An ADD or MUL whose mathematical result does not fit 256 bits.
pub fn integer_overflow(result: &ExecResult) -> Option<Range<usize>> {
    result
        .trace
        .iter()
        .position(|ev| {
            if ev.opcode != opcode::ADD && ev.opcode != opcode::MUL {
                return false;
            }
            let (Some(a), Some(b)) = (ev.stack_head.get(0), ev.stack_head.get(1)) else {
                return false;
            };
            if ev.opcode == opcode::ADD {
                a.value.overflowing_add(b.value).1
            } else {
                a.value.overflowing_mul(b.value).1
            }
        })
        .map(|i| i..i + 1)
}

/// A SUB returning a negative value in unsigned interpretation.
pub fn integer_underflow(result: &ExecResult) -> Option<Range<usize>> {
    result
        .trace
        .iter()
        .position(|ev| {
            ev.opcode == opcode::SUB
                && matches!(
                    (ev.stack_head.get(0), ev.stack_head.get(1)),
                    (Some(a), Some(b)) if a.value < b.value
                )
        })
        .map(|i| i..i + 1)
}

/// Batches logs, deduplicates findings per oracle, and evaluates Freezing
/// Ether at campaign end.
#[derive(Debug)]
pub struct OracleEngine {
    ctx: OracleContext,
    batch: LogBatch,
    reports: BTreeMap<OracleId, VulnerabilityReport>,
    /// First successful value-receiving execution, for the Freezing Ether
    /// warning.
    received: Option<(u64, usize)>,
    /// Whether any execution attempted a value-bearing CALL or SELFDESTRUCT
    /// from contract code.
    escape_seen: bool,
    pub batches_checked: u64,
}

impl OracleEngine {
    pub fn new(ctx: OracleContext, batch_size: usize) -> Self {
        OracleEngine {
            ctx,
            batch: LogBatch::new(batch_size.max(1)),
            reports: BTreeMap::new(),
            received: None,
            escape_seen: false,
            batches_checked: 0,
        }
    }

    /// Feeds one executed test case; runs the oracles when a batch fills.
    pub fn observe(&mut self, entry: LogEntry) {
        for (idx, call) in entry.calls.iter().enumerate() {
            if self.received.is_none()
                && !call.value.is_zero()
                && call.result.status == ExecStatus::Success
            {
                self.received = Some((entry.test_case_id, idx));
            }
            if !self.escape_seen {
                self.escape_seen = call.result.trace.iter().any(|ev| {
                    ev.opcode == opcode::SELFDESTRUCT
                        || matches!(
                            &ev.aux,
                            EventAux::Call {
                                delegate: false,
                                value,
                                ..
                            } if !value.is_zero()
                        )
                });
            }
        }
        if self.batch.push(entry) {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.batch.is_empty() {
            return;
        }
        let cap = self.batch.cap;
        let batch = std::mem::replace(&mut self.batch, LogBatch::new(cap));
        self.batches_checked += 1;
        for (test_case_id, (oracle, call_index, evidence)) in check_batch(&batch, &self.ctx) {
            self.record(oracle, test_case_id, call_index, evidence, Confidence::Definite);
        }
    }

    fn record(
        &mut self,
        oracle: OracleId,
        test_case_id: u64,
        call_index: usize,
        evidence: Range<usize>,
        confidence: Confidence,
    ) {
        self.reports
            .entry(oracle)
            .and_modify(|r| r.occurrences += 1)
            .or_insert(VulnerabilityReport {
                oracle,
                test_case_id,
                call_index,
                evidence,
                confidence,
                occurrences: 1,
            });
    }

    /// Checks the final partial batch and the campaign-level Freezing Ether
    /// condition, then returns all reports.
    pub fn finish(mut self) -> Vec<VulnerabilityReport> {
        self.flush();
        if let Some((id, idx)) = self.received {
            if !self.escape_seen {
                self.record(OracleId::FreezingEther, id, idx, 0..0, Confidence::Warning);
            }
        }
        self.reports.into_values().collect()
    }

    /// Reports recorded so far (Freezing Ether excluded until `finish`).
    pub fn reports_so_far(&self) -> Vec<&VulnerabilityReport> {
        self.reports.values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::trace::{NestedCall, StackHead, StackSlot, TraceEvent};

    fn event(opcode: u8, depth: u8, aux: EventAux, head: Vec<StackSlot>) -> TraceEvent {
        let mut stack_head = StackHead::default();
        stack_head.len = head.len().min(4) as u8;
        for (i, s) in head.into_iter().take(4).enumerate() {
            stack_head.slots[i] = s;
        }
        TraceEvent {
            pc: 0,
            opcode,
            gas_remaining: 1000,
            depth,
            stack_head,
            aux,
        }
    }

    fn result(status: ExecStatus, trace: Vec<TraceEvent>, nested: Vec<NestedCall>) -> ExecResult {
        ExecResult {
            status,
            return_data: Vec::new(),
            gas_used: 0,
            trace,
            nested,
        }
    }

    fn failed_send(value: u64, gas: u64) -> TraceEvent {
        event(
            opcode::CALL,
            0,
            EventAux::Call {
                delegate: false,
                callee: Address::low(0xa1),
                value: Word::from(value),
                forwarded_gas: gas,
                success: Some(false),
                target_taint: Taint::NONE,
            },
            vec![],
        )
    }

    fn ctx() -> OracleContext {
        OracleContext {
            contract: Address::low(0xf0),
            reentrancy_loaded: false,
        }
    }

    #[test]
    fn gasless_send_fires_on_unchecked_stipend_failure() {
        let r = result(ExecStatus::Success, vec![failed_send(5, 2300)], vec![]);
        assert!(gasless_send(&r).is_some());
        // checked flag: a JUMPI consuming a call-result-tainted slot
        let checked = result(
            ExecStatus::Success,
            vec![
                failed_send(5, 2300),
                event(
                    opcode::JUMPI,
                    0,
                    EventAux::Jumpi {
                        target: 9,
                        taken: false,
                    },
                    vec![
                        StackSlot::plain(Word::from(9u8)),
                        StackSlot::tainted(Word::zero(), Taint::CALL_RESULT),
                    ],
                ),
            ],
            vec![],
        );
        assert!(gasless_send(&checked).is_none());
        // non-stipend gas: not a send
        let big_gas = result(ExecStatus::Success, vec![failed_send(5, 50_000)], vec![]);
        assert!(gasless_send(&big_gas).is_none());
        // zero value: not a transfer
        let no_value = result(ExecStatus::Success, vec![failed_send(0, 2300)], vec![]);
        assert!(gasless_send(&no_value).is_none());
    }

    #[test]
    fn exception_disorder_needs_successful_root() {
        let nested_fail = vec![NestedCall {
            event_index: 0,
            depth: 1,
            callee: Address::low(0xaa),
            delegate: false,
            status: ExecStatus::Exception,
        }];
        let r = result(ExecStatus::Success, vec![], nested_fail.clone());
        assert!(exception_disorder(&r).is_some());
        let failed_root = result(ExecStatus::Exception, vec![], nested_fail);
        assert!(exception_disorder(&failed_root).is_none());
        let all_ok = result(
            ExecStatus::Success,
            vec![],
            vec![NestedCall {
                event_index: 0,
                depth: 1,
                callee: Address::low(0xaa),
                delegate: false,
                status: ExecStatus::Success,
            }],
        );
        assert!(exception_disorder(&all_ok).is_none());
    }

    #[test]
    fn reentrancy_requires_depth_two_and_state_change() {
        let contract = Address::low(0xf0);
        let reentered = vec![NestedCall {
            event_index: 1,
            depth: 2,
            callee: contract,
            delegate: false,
            status: ExecStatus::Success,
        }];
        let trace = vec![
            event(opcode::CALL, 0, EventAux::None, vec![]),
            event(
                opcode::SSTORE,
                2,
                EventAux::Sstore {
                    key: Word::zero(),
                    value: Word::one(),
                    taint: Taint::NONE,
                },
                vec![],
            ),
        ];
        let r = result(ExecStatus::Success, trace, reentered.clone());
        assert!(reentrancy(&r, contract).is_some());
        // the re-entered frame doing nothing state-changing stays silent
        let quiet = result(
            ExecStatus::Success,
            vec![
                event(opcode::CALL, 0, EventAux::None, vec![]),
                event(opcode::PC, 2, EventAux::None, vec![]),
            ],
            reentered,
        );
        assert!(reentrancy(&quiet, contract).is_none());
        // a depth-1 call into the contract is an ordinary call, not reentry
        let shallow = result(
            ExecStatus::Success,
            vec![event(opcode::SSTORE, 1, EventAux::None, vec![])],
            vec![NestedCall {
                event_index: 0,
                depth: 1,
                callee: contract,
                delegate: false,
                status: ExecStatus::Success,
            }],
        );
        assert!(reentrancy(&shallow, contract).is_none());
    }

    #[test]
    fn taint_dependency_needs_both_jumpi_and_value_call() {
        let tainted_jumpi = event(
            opcode::JUMPI,
            0,
            EventAux::Jumpi {
                target: 5,
                taken: true,
            },
            vec![
                StackSlot::plain(Word::from(5u8)),
                StackSlot::tainted(Word::one(), Taint::TIMESTAMP),
            ],
        );
        let value_call = event(
            opcode::CALL,
            0,
            EventAux::Call {
                delegate: false,
                callee: Address::low(0xa1),
                value: Word::one(),
                forwarded_gas: 2300,
                success: Some(true),
                target_taint: Taint::NONE,
            },
            vec![],
        );
        let both = result(
            ExecStatus::Success,
            vec![tainted_jumpi.clone(), value_call.clone()],
            vec![],
        );
        assert!(dependency(&both, Taint::TIMESTAMP).is_some());
        assert!(dependency(&both, Taint::BLOCK_NUMBER).is_none());
        let jumpi_only = result(ExecStatus::Success, vec![tainted_jumpi], vec![]);
        assert!(dependency(&jumpi_only, Taint::TIMESTAMP).is_none());
        let call_only = result(ExecStatus::Success, vec![value_call], vec![]);
        assert!(dependency(&call_only, Taint::TIMESTAMP).is_none());
    }

    #[test]
    fn delegatecall_fires_only_on_calldata_tainted_target() {
        let tainted = result(
            ExecStatus::Success,
            vec![event(
                opcode::DELEGATECALL,
                0,
                EventAux::Call {
                    delegate: true,
                    callee: Address::low(0x99),
                    value: Word::zero(),
                    forwarded_gas: 1000,
                    success: Some(true),
                    target_taint: Taint::CALLDATA,
                },
                vec![],
            )],
            vec![],
        );
        assert!(dangerous_delegate_call(&tainted).is_some());
        let constant = result(
            ExecStatus::Success,
            vec![event(
                opcode::DELEGATECALL,
                0,
                EventAux::Call {
                    delegate: true,
                    callee: Address::low(0x99),
                    value: Word::zero(),
                    forwarded_gas: 1000,
                    success: Some(true),
                    target_taint: Taint::NONE,
                },
                vec![],
            )],
            vec![],
        );
        assert!(dangerous_delegate_call(&constant).is_none());
    }

    #[test]
    fn arithmetic_oracles_recompute_wide_results() {
        let overflow_add = result(
            ExecStatus::Success,
            vec![event(
                opcode::ADD,
                0,
                EventAux::None,
                vec![StackSlot::plain(Word::MAX), StackSlot::plain(Word::one())],
            )],
            vec![],
        );
        assert!(integer_overflow(&overflow_add).is_some());
        let safe_add = result(
            ExecStatus::Success,
            vec![event(
                opcode::ADD,
                0,
                EventAux::None,
                vec![
                    StackSlot::plain(Word::from(2u8)),
                    StackSlot::plain(Word::from(3u8)),
                ],
            )],
            vec![],
        );
        assert!(integer_overflow(&safe_add).is_none());
        let underflow = result(
            ExecStatus::Success,
            vec![event(
                opcode::SUB,
                0,
                EventAux::None,
                vec![
                    StackSlot::plain(Word::from(1u8)),
                    StackSlot::plain(Word::from(2u8)),
                ],
            )],
            vec![],
        );
        assert!(integer_underflow(&underflow).is_some());
        let ok_sub = result(
            ExecStatus::Success,
            vec![event(
                opcode::SUB,
                0,
                EventAux::None,
                vec![
                    StackSlot::plain(Word::from(2u8)),
                    StackSlot::plain(Word::from(1u8)),
                ],
            )],
            vec![],
        );
        assert!(integer_underflow(&ok_sub).is_none());
    }

    #[test]
    fn engine_batches_every_n_test_cases_and_dedups() {
        let mut engine = OracleEngine::new(ctx(), 3);
        for id in 0..7u64 {
            engine.observe(LogEntry {
                test_case_id: id,
                calls: vec![CallLog {
                    value: Word::zero(),
                    result: result(ExecStatus::Success, vec![failed_send(5, 2300)], vec![]),
                }],
            });
        }
        assert_eq!(engine.batches_checked, 2);
        let reports = engine.finish();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].oracle, OracleId::GaslessSend);
        assert_eq!(reports[0].test_case_id, 0);
        assert_eq!(reports[0].occurrences, 7);
        assert_eq!(reports[0].confidence, Confidence::Definite);
    }

    #[test]
    fn freezing_ether_is_a_campaign_end_warning() {
        // receives value, never attempts a send: flagged at finish
        let mut engine = OracleEngine::new(ctx(), 500);
        engine.observe(LogEntry {
            test_case_id: 4,
            calls: vec![CallLog {
                value: Word::from(9u8),
                result: result(ExecStatus::Success, vec![], vec![]),
            }],
        });
        assert!(engine.reports_so_far().is_empty());
        let reports = engine.finish();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].oracle, OracleId::FreezingEther);
        assert_eq!(reports[0].confidence, Confidence::Warning);

        // a value-bearing CALL anywhere in the campaign clears the warning
        let mut engine = OracleEngine::new(ctx(), 500);
        engine.observe(LogEntry {
            test_case_id: 0,
            calls: vec![CallLog {
                value: Word::from(9u8),
                result: result(ExecStatus::Success, vec![], vec![]),
            }],
        });
        engine.observe(LogEntry {
            test_case_id: 1,
            calls: vec![CallLog {
                value: Word::zero(),
                result: result(
                    ExecStatus::Success,
                    vec![event(
                        opcode::CALL,
                        0,
                        EventAux::Call {
                            delegate: false,
                            callee: Address::low(0xe1),
                            value: Word::one(),
                            forwarded_gas: 2300,
                            success: Some(true),
                            target_taint: Taint::NONE,
                        },
                        vec![],
                    )],
                    vec![],
                ),
            }],
        });
        assert!(engine.finish().is_empty());
    }

    #[test]
    fn pure_arithmetic_trace_yields_empty_report() {
        let mut engine = OracleEngine::new(ctx(), 500);
        engine.observe(LogEntry {
            test_case_id: 0,
            calls: vec![CallLog {
                value: Word::zero(),
                result: result(
                    ExecStatus::Success,
                    vec![event(
                        opcode::ADD,
                        0,
                        EventAux::None,
                        vec![
                            StackSlot::plain(Word::from(1u8)),
                            StackSlot::plain(Word::from(2u8)),
                        ],
                    )],
                    vec![],
                ),
            }],
        });
        assert!(engine.finish().is_empty());
    }

    #[test]
    fn reentrancy_only_checked_when_the_attacker_is_loaded() {
        let contract = Address::low(0xf0);
        let entry = LogEntry {
            test_case_id: 0,
            calls: vec![CallLog {
                value: Word::zero(),
                result: result(
                    ExecStatus::Success,
                    vec![
                        event(opcode::CALL, 0, EventAux::None, vec![]),
                        event(
                            opcode::SSTORE,
                            2,
                            EventAux::Sstore {
                                key: Word::zero(),
                                value: Word::one(),
                                taint: Taint::NONE,
                            },
                            vec![],
                        ),
                    ],
                    vec![NestedCall {
                        event_index: 1,
                        depth: 2,
                        callee: contract,
                        delegate: false,
                        status: ExecStatus::Success,
                    }],
                ),
            }],
        };
        let mut without = OracleEngine::new(ctx(), 1);
        without.observe(entry.clone());
        assert!(without.finish().is_empty());
        let mut with = OracleEngine::new(
            OracleContext {
                contract,
                reentrancy_loaded: true,
            },
            1,
        );
        with.observe(entry);
        let reports = with.finish();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].oracle, OracleId::Reentrancy);
    }
}
