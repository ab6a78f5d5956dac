//! Opcode constants for the supported EVM subset.
//!
//! Anything not in this set raises a frame exception at execution time.

pub const STOP: u8 = 0x00;
pub const ADD: u8 = 0x01;
pub const MUL: u8 = 0x02;
pub const SUB: u8 = 0x03;
pub const DIV: u8 = 0x04;
pub const SDIV: u8 = 0x05;
pub const MOD: u8 = 0x06;
pub const EXP: u8 = 0x0a;
pub const LT: u8 = 0x10;
pub const GT: u8 = 0x11;
pub const SLT: u8 = 0x12;
pub const SGT: u8 = 0x13;
pub const EQ: u8 = 0x14;
pub const ISZERO: u8 = 0x15;
pub const AND: u8 = 0x16;
pub const OR: u8 = 0x17;
pub const XOR: u8 = 0x18;
pub const NOT: u8 = 0x19;
pub const BYTE: u8 = 0x1a;
pub const SHA3: u8 = 0x20;
pub const ADDRESS: u8 = 0x30;
pub const BALANCE: u8 = 0x31;
pub const CALLER: u8 = 0x33;
pub const CALLVALUE: u8 = 0x34;
pub const CALLDATALOAD: u8 = 0x35;
pub const CALLDATASIZE: u8 = 0x36;
pub const CALLDATACOPY: u8 = 0x37;
pub const CODECOPY: u8 = 0x39;
pub const TIMESTAMP: u8 = 0x42;
pub const NUMBER: u8 = 0x43;
pub const POP: u8 = 0x50;
pub const MLOAD: u8 = 0x51;
pub const MSTORE: u8 = 0x52;
pub const MSTORE8: u8 = 0x53;
pub const SLOAD: u8 = 0x54;
pub const SSTORE: u8 = 0x55;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const PC: u8 = 0x58;
pub const GAS: u8 = 0x5a;
pub const JUMPDEST: u8 = 0x5b;
pub const PUSH1: u8 = 0x60;
pub const PUSH32: u8 = 0x7f;
pub const DUP1: u8 = 0x80;
pub const DUP16: u8 = 0x8f;
pub const SWAP1: u8 = 0x90;
pub const SWAP16: u8 = 0x9f;
pub const LOG0: u8 = 0xa0;
pub const LOG4: u8 = 0xa4;
pub const CREATE: u8 = 0xf0;
pub const CALL: u8 = 0xf1;
pub const RETURN: u8 = 0xf3;
pub const DELEGATECALL: u8 = 0xf4;
pub const INVALID: u8 = 0xfe;
pub const REVERT: u8 = 0xfd;
pub const SELFDESTRUCT: u8 = 0xff;

/// Number of immediate bytes following a PUSH opcode, zero otherwise.
pub fn push_bytes(op: u8) -> usize {
    if (PUSH1..=PUSH32).contains(&op) {
        (op - PUSH1) as usize + 1
    } else {
        0
    }
}

pub fn is_push(op: u8) -> bool {
    (PUSH1..=PUSH32).contains(&op)
}

pub fn is_dup(op: u8) -> bool {
    (DUP1..=DUP16).contains(&op)
}

pub fn is_swap(op: u8) -> bool {
    (SWAP1..=SWAP16).contains(&op)
}

pub fn is_log(op: u8) -> bool {
    (LOG0..=LOG4).contains(&op)
}

/// Whether the opcode belongs to the supported subset.
pub fn is_supported(op: u8) -> bool {
    matches!(
        op,
        STOP | ADD
            | MUL
            | SUB
            | DIV
            | SDIV
            | MOD
            | EXP
            | LT
            | GT
            | SLT
            | SGT
            | EQ
            | ISZERO
            | AND
            | OR
            | XOR
            | NOT
            | BYTE
            | SHA3
            | ADDRESS
            | BALANCE
            | CALLER
            | CALLVALUE
            | CALLDATALOAD
            | CALLDATASIZE
            | CALLDATACOPY
            | CODECOPY
            | TIMESTAMP
            | NUMBER
            | POP
            | MLOAD
            | MSTORE
            | MSTORE8
            | SLOAD
            | SSTORE
            | JUMP
            | JUMPI
            | PC
            | GAS
            | JUMPDEST
            | CREATE
            | CALL
            | RETURN
            | DELEGATECALL
            | REVERT
            | SELFDESTRUCT
    ) || is_push(op)
        || is_dup(op)
        || is_swap(op)
        || is_log(op)
}

/// Positions in `code` that are valid JUMPDEST targets, i.e. a JUMPDEST
/// byte not inside PUSH immediate data.
pub fn jump_dest_map(code: &[u8]) -> Vec<bool> {
    let mut dests = vec![false; code.len()];
    let mut pc = 0usize;
    while pc < code.len() {
        let op = code[pc];
        if op == JUMPDEST {
            dests[pc] = true;
        }
        pc += 1 + push_bytes(op);
    }
    dests
}

/// Mnemonic for trace dumps.
pub fn name(op: u8) -> &'static str {
    match op {
        STOP => "STOP",
        ADD => "ADD",
        MUL => "MUL",
        SUB => "SUB",
        DIV => "DIV",
        SDIV => "SDIV",
        MOD => "MOD",
        EXP => "EXP",
        LT => "LT",
        GT => "GT",
        SLT => "SLT",
        SGT => "SGT",
        EQ => "EQ",
        ISZERO => "ISZERO",
        AND => "AND",
        OR => "OR",
        XOR => "XOR",
        NOT => "NOT",
        BYTE => "BYTE",
        SHA3 => "SHA3",
        ADDRESS => "ADDRESS",
        BALANCE => "BALANCE",
        CALLER => "CALLER",
        CALLVALUE => "CALLVALUE",
        CALLDATALOAD => "CALLDATALOAD",
        CALLDATASIZE => "CALLDATASIZE",
        CALLDATACOPY => "CALLDATACOPY",
        CODECOPY => "CODECOPY",
        TIMESTAMP => "TIMESTAMP",
        NUMBER => "NUMBER",
        POP => "POP",
        MLOAD => "MLOAD",
        MSTORE => "MSTORE",
        MSTORE8 => "MSTORE8",
        SLOAD => "SLOAD",
        SSTORE => "SSTORE",
        JUMP => "JUMP",
        JUMPI => "JUMPI",
        PC => "PC",
        GAS => "GAS",
        JUMPDEST => "JUMPDEST",
        CREATE => "CREATE",
        CALL => "CALL",
        RETURN => "RETURN",
        DELEGATECALL => "DELEGATECALL",
        INVALID => "INVALID",
        REVERT => "REVERT",
        SELFDESTRUCT => "SELFDESTRUCT",
        _ if is_push(op) => "PUSH",
        _ if is_dup(op) => "DUP",
        _ if is_swap(op) => "SWAP",
        _ if is_log(op) => "LOG",
        _ => "UNKNOWN",
    }
}
