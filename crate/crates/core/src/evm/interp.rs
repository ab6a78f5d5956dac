//! The instrumented interpreter: frames, calls, gas, taint, predicates,
//! attacker natives and rollback.

use std::rc::Rc;

use crate::abi::keccak256;
use crate::evm::gas::GasSchedule;
use crate::evm::opcode as op;
use crate::evm::trace::{
    CodePhase, EventAux, EventHook, ExecResult, ExecStatus, FrameInfo, NestedCall, PredOp,
    PredicateTag, StackHead, StackSlot, Taint, TraceEvent,
};
use crate::evm::world::{Account, AccountKind, Address, World};
use crate::word::{self, Word};

/// Nesting deeper than this is refused.
pub const MAX_CALL_DEPTH: u8 = 64;
/// EVM stack limit.
pub const MAX_STACK: usize = 1024;

/// One transaction-level or internal call.
#[derive(Clone, Debug)]
pub struct Message {
    pub caller: Address,
    pub callee: Address,
    pub value: Word,
    pub data: Vec<u8>,
    pub gas: u64,
    pub depth: u8,
    pub is_delegate: bool,
}

impl Message {
    pub fn transaction(caller: Address, callee: Address, value: Word, data: Vec<u8>, gas: u64) -> Self {
        Message {
            caller,
            callee,
            value,
            data,
            gas,
            depth: 0,
            is_delegate: false,
        }
    }
}

/// API misuse; execution faults are reported through `ExecResult::status`.
#[derive(Debug, thiserror::Error)]
pub enum VmError {
    #[error("callee {0} does not exist in the world")]
    UnknownCallee(Address),
    #[error("message gas must be positive")]
    NoGas,
    #[error("call depth {0} exceeds {MAX_CALL_DEPTH}")]
    DepthExceeded(u8),
    #[error("caller balance is below the message value")]
    InsufficientBalance,
    #[error("init code is empty")]
    EmptyInitCode,
    #[error("address {0} is already occupied")]
    AddressOccupied(Address),
}

/// Outcome of `deploy`: the constructor trace is always returned so coverage
/// can observe init-phase branches, the address only on success.
#[derive(Debug)]
pub struct DeployOutcome {
    pub address: Option<Address>,
    pub result: ExecResult,
}

enum Fault {
    UnknownOpcode,
    StackUnderflow,
    StackOverflow,
    OutOfGas,
    BadJump,
    MemoryLimit,
    Invalid,
}

struct Memory {
    bytes: Vec<u8>,
    /// One taint per 32-byte word.
    taint: Vec<Taint>,
    limit: usize,
}

impl Memory {
    fn new(limit: usize) -> Self {
        Memory {
            bytes: Vec::new(),
            taint: Vec::new(),
            limit,
        }
    }

    fn grow(&mut self, end: usize) -> Result<(), Fault> {
        if end > self.limit {
            return Err(Fault::MemoryLimit);
        }
        if end > self.bytes.len() {
            let rounded = end.div_ceil(32) * 32;
            self.bytes.resize(rounded, 0);
            self.taint.resize(rounded / 32, Taint::NONE);
        }
        Ok(())
    }

    fn load_word(&mut self, off: usize) -> Result<(Word, Taint), Fault> {
        self.grow(off + 32)?;
        let w = word::from_be_slice(&self.bytes[off..off + 32]);
        Ok((w, self.taint_of(off, 32)))
    }

    fn store_word(&mut self, off: usize, w: Word, taint: Taint) -> Result<(), Fault> {
        self.grow(off + 32)?;
        self.bytes[off..off + 32].copy_from_slice(&word::to_be_bytes(w));
        self.set_taint(off, 32, taint);
        Ok(())
    }

    fn store_byte(&mut self, off: usize, b: u8, taint: Taint) -> Result<(), Fault> {
        self.grow(off + 1)?;
        self.bytes[off] = b;
        let idx = off / 32;
        self.taint[idx] = self.taint[idx].union(taint);
        Ok(())
    }

    fn write(&mut self, off: usize, data: &[u8], taint: Taint) -> Result<(), Fault> {
        if data.is_empty() {
            return Ok(());
        }
        self.grow(off + data.len())?;
        self.bytes[off..off + data.len()].copy_from_slice(data);
        self.set_taint(off, data.len(), taint);
        Ok(())
    }

    fn read(&mut self, off: usize, len: usize) -> Result<&[u8], Fault> {
        if len == 0 {
            return Ok(&[]);
        }
        self.grow(off + len)?;
        Ok(&self.bytes[off..off + len])
    }

    fn taint_of(&self, off: usize, len: usize) -> Taint {
        if len == 0 {
            return Taint::NONE;
        }
        let mut t = Taint::NONE;
        let first = off / 32;
        let last = (off + len - 1) / 32;
        for idx in first..=last.min(self.taint.len().saturating_sub(1)) {
            t = t.union(self.taint[idx]);
        }
        t
    }

    fn set_taint(&mut self, off: usize, len: usize, taint: Taint) {
        if len == 0 {
            return;
        }
        let first = off / 32;
        let last = (off + len - 1) / 32;
        for idx in first..=last {
            self.taint[idx] = taint;
        }
    }
}

struct FrameParams {
    /// Storage and identity context.
    address: Address,
    /// Account whose code runs; differs from `address` under DELEGATECALL.
    code_address: Address,
    caller: Address,
    value: Word,
    data: Rc<Vec<u8>>,
    gas: u64,
    depth: u8,
    is_delegate: bool,
    phase: CodePhase,
    code: Rc<Vec<u8>>,
}

struct FrameOutcome {
    status: ExecStatus,
    return_data: Vec<u8>,
    gas_left: u64,
}

impl FrameOutcome {
    fn fault(_f: Fault) -> Self {
        FrameOutcome {
            status: ExecStatus::Exception,
            return_data: Vec::new(),
            gas_left: 0,
        }
    }
}

struct ExecCtx<'a> {
    world: &'a mut World,
    schedule: &'a GasSchedule,
    hook: &'a mut dyn EventHook,
    trace: Vec<TraceEvent>,
    nested: Vec<NestedCall>,
    /// (address, calldata) of every live frame, outermost first; the
    /// reentrancy attacker reads its caller's entry to build the call-back.
    frame_stack: Vec<(Address, Rc<Vec<u8>>)>,
}

/// Executes one message against `world`, emitting one event per opcode
/// through `hook` before the opcode's effects. On a non-success status every
/// state change of the message is rolled back.
pub fn execute_message(
    world: &mut World,
    msg: &Message,
    schedule: &GasSchedule,
    hook: &mut dyn EventHook,
) -> Result<ExecResult, VmError> {
    if msg.gas == 0 {
        return Err(VmError::NoGas);
    }
    if msg.depth > MAX_CALL_DEPTH {
        return Err(VmError::DepthExceeded(msg.depth));
    }
    let callee = world
        .account(&msg.callee)
        .ok_or(VmError::UnknownCallee(msg.callee))?
        .clone();
    if world.balance(&msg.caller) < msg.value {
        return Err(VmError::InsufficientBalance);
    }

    let snapshot = world.clone();
    let mut ctx = ExecCtx {
        world,
        schedule,
        hook,
        trace: Vec::new(),
        nested: Vec::new(),
        frame_stack: Vec::new(),
    };
    ctx.world.transfer(&msg.caller, &msg.callee, msg.value);
    let data = Rc::new(msg.data.clone());
    let outcome = ctx.dispatch_account(
        callee.kind,
        Rc::new(callee.code),
        msg.callee,
        msg.caller,
        msg.value,
        data,
        msg.gas,
        msg.depth,
        msg.is_delegate,
        CodePhase::Runtime,
    );
    let result = ExecResult {
        status: outcome.status,
        return_data: outcome.return_data,
        gas_used: msg.gas - outcome.gas_left.min(msg.gas),
        trace: ctx.trace,
        nested: ctx.nested,
    };
    if result.status != ExecStatus::Success {
        *world = snapshot;
    }
    Ok(result)
}

/// Runs `init_code` as a constructor for `creator` and stores the returned
/// runtime code at a fresh deterministic address. A constructor failure
/// leaves the world unchanged.
pub fn deploy(
    world: &mut World,
    creator: Address,
    init_code: &[u8],
    value: Word,
    schedule: &GasSchedule,
    hook: &mut dyn EventHook,
) -> Result<DeployOutcome, VmError> {
    let nonce = world
        .account(&creator)
        .ok_or(VmError::UnknownCallee(creator))?
        .nonce;
    let address = World::derive_address(&creator, nonce);
    deploy_at(world, creator, address, init_code, value, schedule, hook)
}

/// `deploy`, but at a caller-chosen address (the campaign pins the contract
/// under test at the configured address).
pub fn deploy_at(
    world: &mut World,
    creator: Address,
    address: Address,
    init_code: &[u8],
    value: Word,
    schedule: &GasSchedule,
    hook: &mut dyn EventHook,
) -> Result<DeployOutcome, VmError> {
    if init_code.is_empty() {
        return Err(VmError::EmptyInitCode);
    }
    if world.account(&creator).is_none() {
        return Err(VmError::UnknownCallee(creator));
    }
    if world.balance(&creator) < value {
        return Err(VmError::InsufficientBalance);
    }
    if world
        .account(&address)
        .is_some_and(|a| !a.code.is_empty() || a.kind != AccountKind::External)
    {
        return Err(VmError::AddressOccupied(address));
    }

    let snapshot = world.clone();
    world.account_mut(&creator).nonce += 1;
    let target = world.account_mut(&address);
    target.kind = AccountKind::Contract;
    world.transfer(&creator, &address, value);

    let mut ctx = ExecCtx {
        world,
        schedule,
        hook,
        trace: Vec::new(),
        nested: Vec::new(),
        frame_stack: Vec::new(),
    };
    let gas = 10_000_000;
    let outcome = ctx.run_frame(FrameParams {
        address,
        code_address: address,
        caller: creator,
        value,
        data: Rc::new(Vec::new()),
        gas,
        depth: 0,
        is_delegate: false,
        phase: CodePhase::Init,
        code: Rc::new(init_code.to_vec()),
    });
    let result = ExecResult {
        status: outcome.status,
        return_data: outcome.return_data.clone(),
        gas_used: gas - outcome.gas_left.min(gas),
        trace: ctx.trace,
        nested: ctx.nested,
    };
    if result.status == ExecStatus::Success {
        world.account_mut(&address).code = outcome.return_data;
        Ok(DeployOutcome {
            address: Some(address),
            result,
        })
    } else {
        *world = snapshot;
        Ok(DeployOutcome {
            address: None,
            result,
        })
    }
}

impl<'a> ExecCtx<'a> {
    /// Routes a call to bytecode, native attacker behavior, or the trivial
    /// external-account accept, per the callee's kind.
    #[allow(clippy::too_many_arguments)]
    fn dispatch_account(
        &mut self,
        kind: AccountKind,
        code: Rc<Vec<u8>>,
        address: Address,
        caller: Address,
        value: Word,
        data: Rc<Vec<u8>>,
        gas: u64,
        depth: u8,
        is_delegate: bool,
        phase: CodePhase,
    ) -> FrameOutcome {
        match kind {
            AccountKind::AttackerNormal => self.attacker_normal(),
            AccountKind::AttackerReentrancy => {
                self.attacker_reentrancy(address, caller, gas, depth)
            }
            _ => {
                if code.is_empty() {
                    // Externally owned or empty contract: accept the transfer.
                    return FrameOutcome {
                        status: ExecStatus::Success,
                        return_data: Vec::new(),
                        gas_left: gas,
                    };
                }
                self.run_frame(FrameParams {
                    address,
                    code_address: address,
                    caller,
                    value,
                    data,
                    gas,
                    depth,
                    is_delegate,
                    phase,
                    code,
                })
            }
        }
    }

    /// Throws whenever its fallback is called, consuming all forwarded gas.
    fn attacker_normal(&mut self) -> FrameOutcome {
        FrameOutcome {
            status: ExecStatus::Exception,
            return_data: Vec::new(),
            gas_left: 0,
        }
    }

    /// Calls back the function that invoked it (same calldata, zero value),
    /// then succeeds; on any failure to call back it throws like the normal
    /// attacker.
    fn attacker_reentrancy(
        &mut self,
        self_addr: Address,
        caller: Address,
        gas: u64,
        depth: u8,
    ) -> FrameOutcome {
        let call_cost = self.schedule.call;
        let Some((parent_addr, parent_data)) = self.frame_stack.last().cloned() else {
            return self.attacker_normal();
        };
        if parent_addr != caller || depth >= MAX_CALL_DEPTH || gas <= call_cost {
            return self.attacker_normal();
        }
        let Some(target) = self.world.account(&caller).cloned() else {
            return self.attacker_normal();
        };
        if target.code.is_empty() {
            return self.attacker_normal();
        }
        let forwarded = gas - call_cost;
        let snapshot = self.world.clone();
        let nested_idx = self.nested.len();
        self.nested.push(NestedCall {
            event_index: self.trace.len(),
            depth: depth + 1,
            callee: caller,
            delegate: false,
            status: ExecStatus::Exception,
        });
        let outcome = self.run_frame(FrameParams {
            address: caller,
            code_address: caller,
            caller: self_addr,
            value: Word::zero(),
            data: parent_data,
            gas: forwarded,
            depth: depth + 1,
            is_delegate: false,
            phase: CodePhase::Runtime,
            code: Rc::new(target.code),
        });
        self.nested[nested_idx].status = outcome.status;
        if outcome.status == ExecStatus::Success {
            FrameOutcome {
                status: ExecStatus::Success,
                return_data: Vec::new(),
                gas_left: outcome.gas_left.min(forwarded),
            }
        } else {
            *self.world = snapshot;
            self.attacker_normal()
        }
    }

    fn run_frame(&mut self, f: FrameParams) -> FrameOutcome {
        self.hook.frame_enter(&FrameInfo {
            address: f.address,
            code_address: f.code_address,
            depth: f.depth,
            is_delegate: f.is_delegate,
            phase: f.phase,
        });
        self.frame_stack.push((f.address, Rc::clone(&f.data)));
        let outcome = self.frame_loop(f);
        self.frame_stack.pop();
        self.hook.frame_exit(outcome.status);
        outcome
    }

    fn frame_loop(&mut self, f: FrameParams) -> FrameOutcome {
        let code: &[u8] = &f.code;
        let dests = op::jump_dest_map(code);
        let mut stack: Vec<StackSlot> = Vec::with_capacity(64);
        let mut mem = Memory::new(self.schedule.memory_limit);
        let mut gas = f.gas;
        let mut pc: usize = 0;

        macro_rules! fault {
            ($kind:expr) => {
                return FrameOutcome::fault($kind)
            };
        }
        macro_rules! pop {
            () => {
                match stack.pop() {
                    Some(s) => s,
                    None => fault!(Fault::StackUnderflow),
                }
            };
        }
        macro_rules! push {
            ($slot:expr) => {{
                if stack.len() >= MAX_STACK {
                    fault!(Fault::StackOverflow);
                }
                stack.push($slot);
            }};
        }
        macro_rules! mem_try {
            ($e:expr) => {
                match $e {
                    Ok(v) => v,
                    Err(fault) => fault!(fault),
                }
            };
        }
        macro_rules! usize_or_fault {
            ($w:expr) => {{
                let w: Word = $w;
                if w > Word::from(self.schedule.memory_limit) {
                    fault!(Fault::MemoryLimit);
                }
                w.as_usize()
            }};
        }

        loop {
            if pc >= code.len() {
                // Running off the end of the code halts like STOP.
                return FrameOutcome {
                    status: ExecStatus::Success,
                    return_data: Vec::new(),
                    gas_left: gas,
                };
            }
            let opcode = code[pc];
            let aux = self.pre_aux(opcode, &stack, gas, &f);
            let ev = TraceEvent {
                pc: pc as u32,
                opcode,
                gas_remaining: gas,
                depth: f.depth,
                stack_head: snapshot_head(&stack),
                aux,
            };
            self.hook.event(&ev);
            self.trace.push(ev);
            let ev_idx = self.trace.len() - 1;

            if !op::is_supported(opcode) {
                fault!(Fault::UnknownOpcode);
            }

            let cost = self.opcode_cost(opcode, &stack);
            if gas < cost {
                fault!(Fault::OutOfGas);
            }
            gas -= cost;

            let mut next_pc = pc + 1 + op::push_bytes(opcode);
            match opcode {
                op::STOP => {
                    return FrameOutcome {
                        status: ExecStatus::Success,
                        return_data: Vec::new(),
                        gas_left: gas,
                    }
                }
                op::ADD | op::MUL | op::SUB | op::DIV | op::SDIV | op::MOD | op::EXP => {
                    let a = pop!();
                    let b = pop!();
                    let v = match opcode {
                        op::ADD => word::add(a.value, b.value),
                        op::MUL => word::mul(a.value, b.value),
                        op::SUB => word::sub(a.value, b.value),
                        op::DIV => word::div(a.value, b.value),
                        op::SDIV => word::sdiv(a.value, b.value),
                        op::MOD => word::rem(a.value, b.value),
                        _ => word::exp(a.value, b.value),
                    };
                    push!(StackSlot::tainted(v, a.taint.union(b.taint)));
                }
                op::LT | op::GT | op::SLT | op::SGT | op::EQ => {
                    let a = pop!();
                    let b = pop!();
                    let (pred_op, holds) = match opcode {
                        op::LT => (PredOp::Lt, a.value < b.value),
                        op::GT => (PredOp::Gt, a.value > b.value),
                        op::SLT => (PredOp::Slt, word::slt(a.value, b.value)),
                        op::SGT => (PredOp::Sgt, word::sgt(a.value, b.value)),
                        _ => (PredOp::Eq, a.value == b.value),
                    };
                    push!(StackSlot {
                        value: if holds { Word::one() } else { Word::zero() },
                        predicate: Some(Box::new(PredicateTag {
                            op: pred_op,
                            a: a.value,
                            b: b.value,
                            negations: 0,
                        })),
                        taint: a.taint.union(b.taint),
                    });
                }
                op::ISZERO => {
                    let x = pop!();
                    let predicate = x.predicate.map(|tag| {
                        Box::new(PredicateTag {
                            negations: tag.negations.wrapping_add(1),
                            ..*tag
                        })
                    });
                    push!(StackSlot {
                        value: if x.value.is_zero() {
                            Word::one()
                        } else {
                            Word::zero()
                        },
                        predicate,
                        taint: x.taint,
                    });
                }
                op::AND | op::OR | op::XOR => {
                    let a = pop!();
                    let b = pop!();
                    let v = match opcode {
                        op::AND => a.value & b.value,
                        op::OR => a.value | b.value,
                        _ => a.value ^ b.value,
                    };
                    push!(StackSlot::tainted(v, a.taint.union(b.taint)));
                }
                op::NOT => {
                    let x = pop!();
                    push!(StackSlot::tainted(!x.value, x.taint));
                }
                op::BYTE => {
                    let i = pop!();
                    let x = pop!();
                    push!(StackSlot::tainted(
                        word::byte(i.value, x.value),
                        i.taint.union(x.taint)
                    ));
                }
                op::SHA3 => {
                    let off = usize_or_fault!(pop!().value);
                    let len = usize_or_fault!(pop!().value);
                    let taint = mem.taint_of(off, len);
                    let data = mem_try!(mem.read(off, len));
                    let digest = keccak256(data);
                    push!(StackSlot::tainted(word::from_be_slice(&digest), taint));
                }
                op::ADDRESS => push!(StackSlot::plain(f.address.to_word())),
                op::BALANCE => {
                    let a = pop!();
                    let addr = Address::from_word(a.value);
                    push!(StackSlot::tainted(self.world.balance(&addr), a.taint));
                }
                op::CALLER => push!(StackSlot::plain(f.caller.to_word())),
                op::CALLVALUE => push!(StackSlot::plain(f.value)),
                op::CALLDATALOAD => {
                    let off = pop!();
                    let v = calldata_word(&f.data, off.value);
                    push!(StackSlot::tainted(v, Taint::CALLDATA.union(off.taint)));
                }
                op::CALLDATASIZE => push!(StackSlot::plain(Word::from(f.data.len()))),
                op::CALLDATACOPY => {
                    let dst = usize_or_fault!(pop!().value);
                    let src = pop!().value;
                    let len = usize_or_fault!(pop!().value);
                    let bytes = calldata_slice(&f.data, src, len);
                    mem_try!(mem.write(dst, &bytes, Taint::CALLDATA));
                }
                op::CODECOPY => {
                    let dst = usize_or_fault!(pop!().value);
                    let src = pop!().value;
                    let len = usize_or_fault!(pop!().value);
                    let bytes = calldata_slice(&f.code, src, len);
                    mem_try!(mem.write(dst, &bytes, Taint::NONE));
                }
                op::TIMESTAMP => {
                    push!(StackSlot::tainted(self.world.timestamp, Taint::TIMESTAMP))
                }
                op::NUMBER => {
                    push!(StackSlot::tainted(
                        self.world.block_number,
                        Taint::BLOCK_NUMBER
                    ))
                }
                op::POP => {
                    pop!();
                }
                op::MLOAD => {
                    let off = usize_or_fault!(pop!().value);
                    let (v, t) = mem_try!(mem.load_word(off));
                    push!(StackSlot::tainted(v, t));
                }
                op::MSTORE => {
                    let off = usize_or_fault!(pop!().value);
                    let v = pop!();
                    mem_try!(mem.store_word(off, v.value, v.taint));
                }
                op::MSTORE8 => {
                    let off = usize_or_fault!(pop!().value);
                    let v = pop!();
                    mem_try!(mem.store_byte(off, v.value.byte(0), v.taint));
                }
                op::SLOAD => {
                    let key = pop!();
                    let account = self.world.account_mut(&f.address);
                    let v = account.storage.get(&key.value).copied().unwrap_or_default();
                    let t = account
                        .storage_taint
                        .get(&key.value)
                        .copied()
                        .unwrap_or_default();
                    push!(StackSlot::tainted(v, t));
                }
                op::SSTORE => {
                    let key = pop!();
                    let v = pop!();
                    let account = self.world.account_mut(&f.address);
                    account.storage.insert(key.value, v.value);
                    account.storage_taint.insert(key.value, v.taint);
                }
                op::JUMP => {
                    let target = pop!();
                    let t = usize_or_fault!(target.value);
                    if t >= code.len() || !dests[t] {
                        fault!(Fault::BadJump);
                    }
                    next_pc = t;
                }
                op::JUMPI => {
                    let target = pop!();
                    let cond = pop!();
                    if !cond.value.is_zero() {
                        let t = usize_or_fault!(target.value);
                        if t >= code.len() || !dests[t] {
                            fault!(Fault::BadJump);
                        }
                        next_pc = t;
                    }
                }
                op::PC => push!(StackSlot::plain(Word::from(pc))),
                op::GAS => push!(StackSlot::plain(Word::from(gas))),
                op::JUMPDEST => {}
                _ if op::is_push(opcode) => {
                    let n = op::push_bytes(opcode);
                    let end = (pc + 1 + n).min(code.len());
                    let mut buf = [0u8; 32];
                    let avail = end - (pc + 1);
                    buf[32 - n..32 - n + avail].copy_from_slice(&code[pc + 1..end]);
                    push!(StackSlot::plain(word::from_be_slice(&buf[32 - n..])));
                }
                _ if op::is_dup(opcode) => {
                    let n = (opcode - op::DUP1) as usize + 1;
                    if stack.len() < n {
                        fault!(Fault::StackUnderflow);
                    }
                    let slot = stack[stack.len() - n].clone();
                    push!(slot);
                }
                _ if op::is_swap(opcode) => {
                    let n = (opcode - op::SWAP1) as usize + 1;
                    if stack.len() < n + 1 {
                        fault!(Fault::StackUnderflow);
                    }
                    let top = stack.len() - 1;
                    stack.swap(top, top - n);
                }
                _ if op::is_log(opcode) => {
                    let topics = (opcode - op::LOG0) as usize;
                    for _ in 0..2 + topics {
                        pop!();
                    }
                }
                op::CREATE => {
                    let value = pop!().value;
                    let off = usize_or_fault!(pop!().value);
                    let len = usize_or_fault!(pop!().value);
                    let init: Vec<u8> = mem_try!(mem.read(off, len)).to_vec();
                    let (slot, gas_back) = self.op_create(&f, ev_idx, value, init, gas);
                    gas = gas_back;
                    push!(slot);
                }
                op::CALL | op::DELEGATECALL => {
                    let delegate = opcode == op::DELEGATECALL;
                    let req_gas = pop!().value;
                    let target = pop!();
                    let value = if delegate { f.value } else { pop!().value };
                    let in_off = usize_or_fault!(pop!().value);
                    let in_len = usize_or_fault!(pop!().value);
                    let out_off = usize_or_fault!(pop!().value);
                    let out_len = usize_or_fault!(pop!().value);
                    let input: Vec<u8> = mem_try!(mem.read(in_off, in_len)).to_vec();
                    let (flag, ret, gas_back) =
                        self.op_call(&f, ev_idx, delegate, req_gas, target, value, input, gas);
                    gas = gas_back;
                    let writable = ret.len().min(out_len);
                    mem_try!(mem.write(out_off, &ret[..writable], Taint::NONE));
                    push!(flag);
                }
                op::RETURN | op::REVERT => {
                    let off = usize_or_fault!(pop!().value);
                    let len = usize_or_fault!(pop!().value);
                    let data = mem_try!(mem.read(off, len)).to_vec();
                    return FrameOutcome {
                        status: if opcode == op::RETURN {
                            ExecStatus::Success
                        } else {
                            ExecStatus::Revert
                        },
                        return_data: data,
                        gas_left: gas,
                    };
                }
                op::SELFDESTRUCT => {
                    let beneficiary = Address::from_word(pop!().value);
                    let balance = self.world.balance(&f.address);
                    self.world.transfer(&f.address, &beneficiary, balance);
                    self.world.account_mut(&f.address).code = Vec::new();
                    return FrameOutcome {
                        status: ExecStatus::Success,
                        return_data: Vec::new(),
                        gas_left: gas,
                    };
                }
                op::INVALID => fault!(Fault::Invalid),
                _ => fault!(Fault::UnknownOpcode),
            }
            pc = next_pc;
        }
    }

    /// CREATE: run init code from memory, store the returned runtime code at
    /// a nonce-derived address. Returns the result slot and remaining gas.
    fn op_create(
        &mut self,
        f: &FrameParams,
        ev_idx: usize,
        value: Word,
        init: Vec<u8>,
        gas: u64,
    ) -> (StackSlot, u64) {
        let fail = |g| (StackSlot::tainted(Word::zero(), Taint::CALL_RESULT), g);
        if f.depth >= MAX_CALL_DEPTH || init.is_empty() || self.world.balance(&f.address) < value
        {
            return fail(gas);
        }
        let nonce = self.world.account_mut(&f.address).nonce;
        self.world.account_mut(&f.address).nonce += 1;
        let address = World::derive_address(&f.address, nonce);
        if self
            .world
            .account(&address)
            .is_some_and(|a| !a.code.is_empty())
        {
            return fail(gas);
        }
        if let EventAux::Create { address: a, .. } = &mut self.trace[ev_idx].aux {
            *a = address;
        }
        let snapshot = self.world.clone();
        self.world
            .accounts
            .insert(address, Account::contract(Word::zero(), Vec::new()));
        self.world.transfer(&f.address, &address, value);
        let nested_idx = self.nested.len();
        self.nested.push(NestedCall {
            event_index: ev_idx,
            depth: f.depth + 1,
            callee: address,
            delegate: false,
            status: ExecStatus::Exception,
        });
        let outcome = self.run_frame(FrameParams {
            address,
            code_address: address,
            caller: f.address,
            value,
            data: Rc::new(Vec::new()),
            gas,
            depth: f.depth + 1,
            is_delegate: false,
            phase: CodePhase::Init,
            code: Rc::new(init),
        });
        self.nested[nested_idx].status = outcome.status;
        let ok = outcome.status == ExecStatus::Success;
        if let EventAux::Create { success, .. } = &mut self.trace[ev_idx].aux {
            *success = Some(ok);
        }
        if ok {
            self.world.account_mut(&address).code = outcome.return_data;
            (
                StackSlot::tainted(address.to_word(), Taint::CALL_RESULT),
                outcome.gas_left.min(gas),
            )
        } else {
            *self.world = snapshot;
            fail(0)
        }
    }

    /// CALL / DELEGATECALL. Returns (flag slot, returned data, remaining gas).
    #[allow(clippy::too_many_arguments)]
    fn op_call(
        &mut self,
        f: &FrameParams,
        ev_idx: usize,
        delegate: bool,
        req_gas: Word,
        target: StackSlot,
        value: Word,
        input: Vec<u8>,
        gas: u64,
    ) -> (StackSlot, Vec<u8>, u64) {
        let callee = Address::from_word(target.value);
        let requested = if req_gas > Word::from(u64::MAX) {
            u64::MAX
        } else {
            req_gas.as_u64()
        };
        let forwarded = requested.min(gas);
        let callee_gas = if !delegate && !value.is_zero() {
            forwarded + self.schedule.stipend
        } else {
            forwarded
        };
        let patch = |ctx: &mut Self, ok: bool| {
            if let EventAux::Call { success, .. } = &mut ctx.trace[ev_idx].aux {
                *success = Some(ok);
            }
        };

        if f.depth >= MAX_CALL_DEPTH || callee_gas == 0 {
            patch(self, false);
            return (
                StackSlot::tainted(Word::zero(), Taint::CALL_RESULT),
                Vec::new(),
                gas,
            );
        }
        if !delegate && !value.is_zero() && self.world.balance(&f.address) < value {
            patch(self, false);
            return (
                StackSlot::tainted(Word::zero(), Taint::CALL_RESULT),
                Vec::new(),
                gas,
            );
        }

        let account = self.world.account(&callee).cloned().unwrap_or_default();
        let snapshot = self.world.clone();
        if !delegate {
            self.world.transfer(&f.address, &callee, value);
        }
        let gas_after = gas - forwarded;

        let nested_idx = self.nested.len();
        self.nested.push(NestedCall {
            event_index: ev_idx,
            depth: f.depth + 1,
            callee,
            delegate,
            status: ExecStatus::Exception,
        });
        let outcome = if delegate {
            if account.code.is_empty() {
                FrameOutcome {
                    status: ExecStatus::Success,
                    return_data: Vec::new(),
                    gas_left: callee_gas,
                }
            } else {
                self.run_frame(FrameParams {
                    address: f.address,
                    code_address: callee,
                    caller: f.caller,
                    value: f.value,
                    data: Rc::new(input),
                    gas: callee_gas,
                    depth: f.depth + 1,
                    is_delegate: true,
                    phase: CodePhase::Runtime,
                    code: Rc::new(account.code),
                })
            }
        } else {
            self.dispatch_account(
                account.kind,
                Rc::new(account.code),
                callee,
                f.address,
                value,
                Rc::new(input),
                callee_gas,
                f.depth + 1,
                false,
                CodePhase::Runtime,
            )
        };
        self.nested[nested_idx].status = outcome.status;
        let ok = outcome.status == ExecStatus::Success;
        patch(self, ok);
        if !ok {
            *self.world = snapshot;
        }
        // Unused gas returns to the caller, capped at what was forwarded so a
        // stipend surplus can never make gas increase along the parent frame.
        let refund = outcome.gas_left.min(forwarded);
        let flag = StackSlot::tainted(
            if ok { Word::one() } else { Word::zero() },
            Taint::CALL_RESULT,
        );
        (flag, if ok { outcome.return_data } else { Vec::new() }, gas_after + refund)
    }

    /// Opcode-specific payload computed from peeked operands, before effects.
    fn pre_aux(&self, opcode: u8, stack: &[StackSlot], gas: u64, f: &FrameParams) -> EventAux {
        let peek = |i: usize| stack.get(stack.len().wrapping_sub(1 + i));
        match opcode {
            op::JUMPI => {
                let target = peek(0).map(|s| s.value).unwrap_or_default();
                let cond = peek(1).map(|s| !s.value.is_zero()).unwrap_or(false);
                EventAux::Jumpi {
                    target: target.min(Word::from(u32::MAX)).as_u32(),
                    taken: cond,
                }
            }
            op::CALL | op::DELEGATECALL => {
                let delegate = opcode == op::DELEGATECALL;
                let req = peek(0).map(|s| s.value).unwrap_or_default();
                let target = peek(1);
                let value = if delegate {
                    f.value
                } else {
                    peek(2).map(|s| s.value).unwrap_or_default()
                };
                let requested = if req > Word::from(u64::MAX) {
                    u64::MAX
                } else {
                    req.as_u64()
                };
                let cost = self.schedule.call;
                let avail = gas.saturating_sub(cost);
                let forwarded = requested.min(avail);
                let callee_gas = if !delegate && !value.is_zero() {
                    forwarded + self.schedule.stipend
                } else {
                    forwarded
                };
                EventAux::Call {
                    delegate,
                    callee: target
                        .map(|s| Address::from_word(s.value))
                        .unwrap_or(Address::ZERO),
                    value,
                    forwarded_gas: callee_gas,
                    success: None,
                    target_taint: target.map(|s| s.taint).unwrap_or_default(),
                }
            }
            op::SSTORE => {
                let key = peek(0);
                let val = peek(1);
                EventAux::Sstore {
                    key: key.map(|s| s.value).unwrap_or_default(),
                    value: val.map(|s| s.value).unwrap_or_default(),
                    taint: val.map(|s| s.taint).unwrap_or_default(),
                }
            }
            op::CREATE => EventAux::Create {
                address: Address::ZERO,
                success: None,
            },
            op::SELFDESTRUCT => EventAux::Selfdestruct {
                beneficiary: peek(0)
                    .map(|s| Address::from_word(s.value))
                    .unwrap_or(Address::ZERO),
            },
            _ => EventAux::None,
        }
    }

    fn opcode_cost(&self, opcode: u8, stack: &[StackSlot]) -> u64 {
        let peek = |i: usize| {
            stack
                .get(stack.len().wrapping_sub(1 + i))
                .map(|s| s.value)
                .unwrap_or_default()
        };
        match opcode {
            op::SSTORE => self.schedule.sstore,
            op::CALL | op::DELEGATECALL | op::CREATE => self.schedule.call,
            op::SHA3 => {
                let len = peek(1).min(Word::from(u64::MAX)).as_u64() as usize;
                self.schedule.sha3_cost(len)
            }
            op::EXP => {
                let exponent = peek(1);
                let bytes = (256 - exponent.leading_zeros() as u64).div_ceil(8);
                self.schedule.exp_cost(bytes)
            }
            _ => self.schedule.default_cost,
        }
    }
}

fn snapshot_head(stack: &[StackSlot]) -> StackHead {
    let mut head = StackHead::default();
    let n = stack.len().min(4);
    head.len = n as u8;
    for i in 0..n {
        head.slots[i] = stack[stack.len() - 1 - i].clone();
    }
    head
}

fn calldata_word(data: &[u8], off: Word) -> Word {
    let mut buf = [0u8; 32];
    if off <= Word::from(usize::MAX as u64) {
        let off = off.as_usize();
        if off < data.len() {
            let n = (data.len() - off).min(32);
            buf[..n].copy_from_slice(&data[off..off + n]);
        }
    }
    word::from_be_slice(&buf)
}

fn calldata_slice(data: &[u8], off: Word, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    if off <= Word::from(usize::MAX as u64) {
        let off = off.as_usize();
        if off < data.len() {
            let n = (data.len() - off).min(len);
            out[..n].copy_from_slice(&data[off..off + n]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::asm::{assemble, into_init_code};
    use crate::evm::trace::NoopHook;

    const CALLER: Address = Address([0xc1; 20]);
    const CONTRACT: Address = Address([0xf0; 20]);

    fn world_with_code(code: Vec<u8>) -> World {
        let mut w = World::default();
        w.accounts
            .insert(CALLER, Account::external(Word::from(1u64 << 40)));
        w.accounts
            .insert(CONTRACT, Account::contract(Word::zero(), code));
        w
    }

    fn run_src(src: &str) -> ExecResult {
        run_with(src, Vec::new(), Word::zero(), 100_000)
    }

    fn run_with(src: &str, data: Vec<u8>, value: Word, gas: u64) -> ExecResult {
        let mut w = world_with_code(assemble(src).unwrap());
        let msg = Message {
            caller: CALLER,
            callee: CONTRACT,
            value,
            data,
            gas,
            depth: 0,
            is_delegate: false,
        };
        execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap()
    }

    #[test]
    fn straight_line_halt_emits_one_event_per_opcode() {
        let res = run_src("push1 0x00 push1 0x00 return");
        assert_eq!(res.status, ExecStatus::Success);
        assert_eq!(res.trace.len(), 3);
        assert!(res.return_data.is_empty());
    }

    #[test]
    fn sub_pops_top_as_left_operand() {
        // stack [1, 2]; SUB pops a=2, b=1 and computes a-b = 1
        let res = run_src("push1 0x01 push1 0x02 sub push1 0x00 mstore push1 0x20 push1 0x00 return");
        assert_eq!(res.status, ExecStatus::Success);
        assert_eq!(word::from_be_slice(&res.return_data), Word::one());
        // stack [2, 1]; SUB pops a=1, b=2 and wraps to 2^256 - 1
        let res = run_src("push1 0x02 push1 0x01 sub push1 0x00 mstore push1 0x20 push1 0x00 return");
        assert_eq!(word::from_be_slice(&res.return_data), Word::MAX);
    }

    #[test]
    fn value_call_with_zero_gas_argument_forwards_exactly_the_stipend() {
        // CALL pops gas, addr, value, inOff, inLen, outOff, outLen
        let src = "
            push1 0x00 push1 0x00 push1 0x00 push1 0x00
            push1 0x01
            push20 0xc1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1
            push1 0x00
            call
            stop
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        w.account_mut(&CONTRACT).balance = Word::from(10u8);
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert_eq!(res.status, ExecStatus::Success);
        let call_ev = res
            .trace
            .iter()
            .find(|e| e.opcode == op::CALL)
            .expect("CALL event");
        match &call_ev.aux {
            EventAux::Call {
                forwarded_gas,
                value,
                success,
                ..
            } => {
                assert_eq!(*forwarded_gas, 2300);
                assert_eq!(*value, Word::one());
                assert_eq!(*success, Some(true));
            }
            other => panic!("unexpected aux {other:?}"),
        }
        // the EOA received the wei
        assert_eq!(w.balance(&CALLER), Word::from(1u64 << 40) + Word::one());
    }

    #[test]
    fn unknown_opcode_raises_exception_but_still_traces() {
        // 0x1b is SHL, outside the supported subset
        let mut w = world_with_code(vec![0x1b]);
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert_eq!(res.status, ExecStatus::Exception);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.trace[0].opcode, 0x1b);
    }

    #[test]
    fn stack_underflow_and_out_of_gas_raise_exceptions() {
        assert_eq!(run_src("pop").status, ExecStatus::Exception);
        let res = run_with("push1 0x01 push1 0x02 add stop", Vec::new(), Word::zero(), 5);
        assert_eq!(res.status, ExecStatus::Exception);
    }

    #[test]
    fn stack_overflow_raises_exception() {
        let mut src = String::new();
        src.push_str("push1 0x01\n");
        for _ in 0..1024 {
            src.push_str("dup1\n");
        }
        let res = run_src(&src);
        assert_eq!(res.status, ExecStatus::Exception);
    }

    #[test]
    fn exception_rolls_back_world_bit_identically() {
        // SSTORE then INVALID: the write must vanish.
        let src = "push1 0x2a push1 0x00 sstore invalid";
        let mut w = world_with_code(assemble(src).unwrap());
        let before = w.clone();
        let msg = Message::transaction(CALLER, CONTRACT, Word::from(5u8), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert_eq!(res.status, ExecStatus::Exception);
        assert_eq!(w, before);
    }

    #[test]
    fn revert_rolls_back_but_returns_data() {
        let src = "
            push1 0x2a push1 0x00 sstore
            push1 0x07 push1 0x00 mstore
            push1 0x20 push1 0x00 revert
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        let before = w.clone();
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert_eq!(res.status, ExecStatus::Revert);
        assert_eq!(word::from_be_slice(&res.return_data), Word::from(7u8));
        assert_eq!(w, before);
    }

    #[test]
    fn nested_failure_does_not_fail_the_parent() {
        // Call the normal attacker (which throws), ignore the flag, succeed.
        let src = "
            push1 0x00 push1 0x00 push1 0x00 push1 0x00
            push1 0x01
            push20 0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa
            push2 0xffff
            call
            pop
            stop
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        w.account_mut(&CONTRACT).balance = Word::from(10u8);
        w.accounts.insert(
            Address([0xaa; 20]),
            Account::attacker(AccountKind::AttackerNormal, Word::zero()),
        );
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert_eq!(res.status, ExecStatus::Success);
        assert_eq!(res.nested.len(), 1);
        assert_eq!(res.nested[0].status, ExecStatus::Exception);
        // attacker kept no value
        assert_eq!(w.balance(&Address([0xaa; 20])), Word::zero());
        assert_eq!(w.balance(&CONTRACT), Word::from(10u8));
    }

    #[test]
    fn deploy_empty_runtime_code_is_callable_via_fallback_only() {
        let mut w = World::default();
        w.accounts
            .insert(CALLER, Account::external(Word::from(1000u64)));
        // init code returning zero-length runtime
        let init = assemble("push1 0x00 push1 0x00 return").unwrap();
        let out = deploy(&mut w, CALLER, &init, Word::zero(), &GasSchedule::default(), &mut NoopHook)
            .unwrap();
        let addr = out.address.expect("deployed");
        assert!(w.account(&addr).unwrap().code.is_empty());
        // a plain value transfer succeeds through the fallback path
        let msg = Message::transaction(CALLER, addr, Word::from(3u8), Vec::new(), 50_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert!(res.is_success());
        assert_eq!(w.balance(&addr), Word::from(3u8));
    }

    #[test]
    fn deploy_twice_yields_distinct_addresses() {
        let mut w = World::default();
        w.accounts
            .insert(CALLER, Account::external(Word::from(1000u64)));
        let runtime = assemble("stop").unwrap();
        let init = into_init_code(&[], &runtime);
        let sched = GasSchedule::default();
        let a = deploy(&mut w, CALLER, &init, Word::zero(), &sched, &mut NoopHook)
            .unwrap()
            .address
            .unwrap();
        let b = deploy(&mut w, CALLER, &init, Word::zero(), &sched, &mut NoopHook)
            .unwrap()
            .address
            .unwrap();
        assert_ne!(a, b);
        assert_eq!(w.account(&a).unwrap().code, runtime);
    }

    #[test]
    fn failed_constructor_leaves_world_unchanged() {
        let mut w = World::default();
        w.accounts
            .insert(CALLER, Account::external(Word::from(1000u64)));
        let before = w.clone();
        let init = assemble("invalid").unwrap();
        let out = deploy(&mut w, CALLER, &init, Word::from(5u8), &GasSchedule::default(), &mut NoopHook)
            .unwrap();
        assert!(out.address.is_none());
        assert_eq!(out.result.status, ExecStatus::Exception);
        assert_eq!(w, before);
    }

    #[test]
    fn reentrancy_attacker_reenters_caller_at_depth_plus_two() {
        // Contract: on any call, sends 1 wei to the attacker with all gas,
        // then stops. Guarded by a one-shot storage flag so the re-entered
        // frame does not recurse forever.
        let src = "
            push1 0x00 sload
            push @done jumpi
            push1 0x01 push1 0x00 sstore
            push1 0x00 push1 0x00 push1 0x00 push1 0x00
            push1 0x01
            push20 0xabababababababababababababababababababab
            gas
            call
            pop
            stop
            :done
            jumpdest
            stop
        ";
        let attacker = Address([0xab; 20]);
        let mut w = world_with_code(assemble(src).unwrap());
        w.account_mut(&CONTRACT).balance = Word::from(100u8);
        w.accounts.insert(
            attacker,
            Account::attacker(AccountKind::AttackerReentrancy, Word::zero()),
        );
        let msg = Message::transaction(attacker, CONTRACT, Word::zero(), Vec::new(), 200_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert_eq!(res.status, ExecStatus::Success);
        // the re-entered frame of the contract appears at depth 2
        assert!(res.trace.iter().any(|e| e.depth == 2));
        assert!(res
            .nested
            .iter()
            .any(|n| n.callee == CONTRACT && n.depth == 2 && n.status == ExecStatus::Success));
    }

    #[test]
    fn call_depth_is_capped() {
        // The contract calls itself unconditionally; recursion must stop at
        // the depth cap rather than overflowing.
        let src = "
            push1 0x00 push1 0x00 push1 0x00 push1 0x00
            push1 0x00
            address
            gas
            call
            pop
            stop
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 10_000_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert!(res.is_success());
        let max_depth = res.trace.iter().map(|e| e.depth).max().unwrap();
        assert_eq!(max_depth as u32, MAX_CALL_DEPTH as u32);
    }

    #[test]
    fn gas_is_monotone_within_each_frame() {
        let src = "
            push1 0x2a push1 0x00 sstore
            push1 0x00 push1 0x00 push1 0x00 push1 0x00
            push1 0x01
            push20 0xc1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1
            push2 0x1000
            call
            pop
            push1 0x05 push1 0x20 sstore
            stop
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        w.account_mut(&CONTRACT).balance = Word::from(10u8);
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert!(res.is_success());
        let mut last_at_depth: Vec<u64> = Vec::new();
        for ev in &res.trace {
            let d = ev.depth as usize;
            if d >= last_at_depth.len() {
                last_at_depth.resize(d + 1, u64::MAX);
            }
            // returning to an outer depth discards inner frames
            last_at_depth.truncate(d + 1);
            assert!(
                ev.gas_remaining <= last_at_depth[d],
                "gas increased within a frame"
            );
            last_at_depth[d] = ev.gas_remaining;
        }
    }

    #[test]
    fn identical_world_and_message_give_identical_traces() {
        let src = "timestamp push1 0x00 sstore number push1 0x01 sstore stop";
        let make = || {
            let mut w = world_with_code(assemble(src).unwrap());
            w.timestamp = Word::from(99u8);
            w.block_number = Word::from(7u8);
            let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
            execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap()
        };
        let (a, b) = (make(), make());
        assert_eq!(a.status, b.status);
        assert_eq!(a.gas_used, b.gas_used);
        let lines_a: Vec<String> = a.trace.iter().map(|e| e.dump_line()).collect();
        let lines_b: Vec<String> = b.trace.iter().map(|e| e.dump_line()).collect();
        assert_eq!(lines_a, lines_b);
    }

    #[test]
    fn timestamp_taint_reaches_jumpi_condition() {
        let src = "
            timestamp
            push1 0x2a
            eq
            push @skip jumpi
            stop
            :skip
            jumpdest
            stop
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        let jumpi = res.trace.iter().find(|e| e.opcode == op::JUMPI).unwrap();
        let cond = jumpi.stack_head.get(1).expect("condition slot");
        assert!(cond.taint.contains(Taint::TIMESTAMP));
        let tag = cond.predicate.as_ref().expect("predicate tag");
        assert_eq!(tag.op, PredOp::Eq);
        // EQ pops the constant (pushed last) as its first operand
        assert_eq!(tag.a, Word::from(0x2au8));
    }

    #[test]
    fn predicate_survives_iszero_and_matches_branch_taken() {
        let src = "
            push1 0x05
            push1 0x05
            eq
            iszero
            push @skip jumpi
            stop
            :skip
            jumpdest
            stop
        ";
        let res = run_src(src);
        let jumpi = res.trace.iter().find(|e| e.opcode == op::JUMPI).unwrap();
        let cond = jumpi.stack_head.get(1).unwrap();
        let tag = cond.predicate.as_ref().unwrap();
        assert_eq!(tag.negations, 1);
        // EQ(5,5) negated once is false, so the branch must not be taken
        assert!(!tag.evaluate());
        match jumpi.aux {
            EventAux::Jumpi { taken, .. } => assert!(!taken),
            _ => panic!("missing jumpi aux"),
        }
    }

    #[test]
    fn storage_persists_and_restores_taint() {
        let src = "
            timestamp push1 0x00 sstore
            push1 0x00 sload
            push1 0x00 eq
            push @skip jumpi
            stop
            :skip jumpdest stop
        ";
        let mut w = world_with_code(assemble(src).unwrap());
        w.timestamp = Word::from(1234u32);
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        let jumpi = res.trace.iter().find(|e| e.opcode == op::JUMPI).unwrap();
        assert!(jumpi
            .stack_head
            .get(1)
            .unwrap()
            .taint
            .contains(Taint::TIMESTAMP));
    }

    #[test]
    fn sha3_inherits_memory_taint_and_hashes_correctly() {
        // keccak of 4 calldata bytes copied to memory
        let src = "
            push1 0x04 push1 0x00 push1 0x00 calldatacopy
            push1 0x04 push1 0x00 sha3
            push1 0x00 mstore
            push1 0x20 push1 0x00 return
        ";
        let res = run_with(src, vec![0xde, 0xad, 0xbe, 0xef], Word::zero(), 100_000);
        assert_eq!(res.status, ExecStatus::Success);
        let expected = crate::abi::keccak256(&[0xde, 0xad, 0xbe, 0xef]);
        assert_eq!(res.return_data, expected.to_vec());
        let sha_ev = res.trace.iter().find(|e| e.opcode == op::SHA3).unwrap();
        // the result is pushed after this event; check the NEXT event's head
        let idx = res
            .trace
            .iter()
            .position(|e| e.opcode == op::SHA3)
            .unwrap();
        let after = &res.trace[idx + 1];
        assert!(after.stack_head.get(0).unwrap().taint.contains(Taint::CALLDATA));
        let _ = sha_ev;
    }

    #[test]
    fn selfdestruct_moves_balance_and_halts() {
        let src = "push20 0xc1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1c1 selfdestruct";
        let mut w = world_with_code(assemble(src).unwrap());
        w.account_mut(&CONTRACT).balance = Word::from(55u8);
        let msg = Message::transaction(CALLER, CONTRACT, Word::zero(), Vec::new(), 100_000);
        let res = execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook).unwrap();
        assert!(res.is_success());
        assert_eq!(w.balance(&CONTRACT), Word::zero());
        assert!(w.account(&CONTRACT).unwrap().code.is_empty());
    }

    #[test]
    fn execute_message_rejects_bad_preconditions() {
        let mut w = world_with_code(vec![op::STOP]);
        let mut msg = Message::transaction(CALLER, Address::low(0x99), Word::zero(), Vec::new(), 1);
        assert!(matches!(
            execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook),
            Err(VmError::UnknownCallee(_))
        ));
        msg.callee = CONTRACT;
        msg.gas = 0;
        assert!(matches!(
            execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook),
            Err(VmError::NoGas)
        ));
        msg.gas = 1000;
        msg.value = Word::MAX;
        assert!(matches!(
            execute_message(&mut w, &msg, &GasSchedule::default(), &mut NoopHook),
            Err(VmError::InsufficientBalance)
        ));
    }
}
