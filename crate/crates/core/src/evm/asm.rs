//! A small two-pass assembler for writing test programs.
//!
//! Syntax: one instruction per line, `;` or `#` comments, `:name` defines a
//! label, `push @name` emits a PUSH2 with the label's offset, `push 0x..`
//! picks the narrowest PUSH that fits, and `pushN 0x..` forces a width.

use std::collections::BTreeMap;

use crate::evm::opcode as op;

#[derive(Debug, thiserror::Error)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic `{token}`")]
    UnknownMnemonic { line: usize, token: String },
    #[error("line {line}: bad operand `{token}`")]
    BadOperand { line: usize, token: String },
    #[error("line {line}: undefined label `{token}`")]
    UndefinedLabel { line: usize, token: String },
    #[error("line {line}: duplicate label `{token}`")]
    DuplicateLabel { line: usize, token: String },
    #[error("bytecode hex: {0}")]
    BadHex(String),
}

enum Item {
    Bytes(Vec<u8>),
    LabelRef { name: String, line: usize },
}

/// Assembles source text into bytecode.
pub fn assemble(src: &str) -> Result<Vec<u8>, AsmError> {
    let mut items: Vec<Item> = Vec::new();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut offset = 0usize;

    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split(&[';', '#'][..]).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        for token_group in split_instructions(line) {
            let mut parts = token_group.split_whitespace();
            let head = parts.next().unwrap();
            if let Some(name) = head.strip_prefix(':') {
                if labels.insert(name.to_string(), offset).is_some() {
                    return Err(AsmError::DuplicateLabel {
                        line: line_no,
                        token: name.to_string(),
                    });
                }
                continue;
            }
            let mnemonic = head.to_ascii_lowercase();
            if mnemonic == "push" || mnemonic.starts_with("push") {
                let operand = parts.next().ok_or_else(|| AsmError::BadOperand {
                    line: line_no,
                    token: token_group.to_string(),
                })?;
                if let Some(name) = operand.strip_prefix('@') {
                    // Label pushes are fixed-width PUSH2.
                    items.push(Item::Bytes(vec![op::PUSH1 + 1]));
                    offset += 1;
                    items.push(Item::LabelRef {
                        name: name.to_string(),
                        line: line_no,
                    });
                    offset += 2;
                } else {
                    let bytes = parse_hex_operand(operand).ok_or_else(|| AsmError::BadOperand {
                        line: line_no,
                        token: operand.to_string(),
                    })?;
                    let width = if mnemonic == "push" {
                        bytes.len().max(1)
                    } else {
                        mnemonic[4..]
                            .parse::<usize>()
                            .ok()
                            .filter(|n| (1..=32).contains(n))
                            .ok_or_else(|| AsmError::UnknownMnemonic {
                                line: line_no,
                                token: head.to_string(),
                            })?
                    };
                    if bytes.len() > width || width > 32 {
                        return Err(AsmError::BadOperand {
                            line: line_no,
                            token: operand.to_string(),
                        });
                    }
                    let mut out = vec![op::PUSH1 + (width as u8 - 1)];
                    out.extend(std::iter::repeat(0u8).take(width - bytes.len()));
                    out.extend_from_slice(&bytes);
                    offset += out.len();
                    items.push(Item::Bytes(out));
                }
            } else {
                let byte = mnemonic_byte(&mnemonic).ok_or_else(|| AsmError::UnknownMnemonic {
                    line: line_no,
                    token: head.to_string(),
                })?;
                items.push(Item::Bytes(vec![byte]));
                offset += 1;
            }
        }
    }

    let mut out = Vec::with_capacity(offset);
    for item in items {
        match item {
            Item::Bytes(b) => out.extend_from_slice(&b),
            Item::LabelRef { name, line } => {
                let target = *labels.get(&name).ok_or(AsmError::UndefinedLabel {
                    line,
                    token: name.clone(),
                })?;
                out.extend_from_slice(&(target as u16).to_be_bytes());
            }
        }
    }
    Ok(out)
}

/// Wraps runtime code (optionally preceded by constructor logic) in the
/// standard deploy preamble: copy the runtime section to memory and return it.
pub fn into_init_code(constructor_body: &[u8], runtime: &[u8]) -> Vec<u8> {
    // PUSH2 len PUSH2 offset PUSH1 0 CODECOPY PUSH2 len PUSH1 0 RETURN
    const PREAMBLE: usize = 3 + 3 + 2 + 1 + 3 + 2 + 1;
    let offset = constructor_body.len() + PREAMBLE;
    let len = runtime.len() as u16;
    let mut out = Vec::with_capacity(offset + runtime.len());
    out.extend_from_slice(constructor_body);
    out.push(op::PUSH1 + 1);
    out.extend_from_slice(&len.to_be_bytes());
    out.push(op::PUSH1 + 1);
    out.extend_from_slice(&(offset as u16).to_be_bytes());
    out.push(op::PUSH1);
    out.push(0);
    out.push(op::CODECOPY);
    out.push(op::PUSH1 + 1);
    out.extend_from_slice(&len.to_be_bytes());
    out.push(op::PUSH1);
    out.push(0);
    out.push(op::RETURN);
    out.extend_from_slice(runtime);
    out
}

/// Parses a bytecode hex file: lowercase hex, optional `0x` prefix,
/// whitespace anywhere.
pub fn parse_hex_bytecode(text: &str) -> Result<Vec<u8>, AsmError> {
    let mut nibbles: Vec<u8> = Vec::new();
    let compact: String = text.split_whitespace().collect();
    let compact = compact.strip_prefix("0x").unwrap_or(&compact);
    for ch in compact.chars() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| AsmError::BadHex(format!("invalid hex character `{ch}`")))?;
        nibbles.push(v as u8);
    }
    if nibbles.len() % 2 != 0 {
        return Err(AsmError::BadHex("odd number of hex digits".into()));
    }
    Ok(nibbles.chunks(2).map(|p| (p[0] << 4) | p[1]).collect())
}

pub fn to_hex(code: &[u8]) -> String {
    let mut s = String::with_capacity(2 + code.len() * 2);
    s.push_str("0x");
    for b in code {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Allows several instructions on one line separated by whitespace only when
/// they carry no operands; `push` operands bind to the preceding token.
fn split_instructions(line: &str) -> Vec<String> {
    let mut groups: Vec<String> = Vec::new();
    let mut tokens = line.split_whitespace().peekable();
    while let Some(tok) = tokens.next() {
        let lower = tok.to_ascii_lowercase();
        if lower.starts_with("push") && !lower.starts_with(':') {
            if let Some(operand) = tokens.next() {
                groups.push(format!("{tok} {operand}"));
            } else {
                groups.push(tok.to_string());
            }
        } else {
            groups.push(tok.to_string());
        }
    }
    groups
}

fn parse_hex_operand(s: &str) -> Option<Vec<u8>> {
    let s = s.strip_prefix("0x")?;
    if s.is_empty() || s.len() > 64 {
        return None;
    }
    let padded = if s.len() % 2 == 1 {
        format!("0{s}")
    } else {
        s.to_string()
    };
    let mut out = Vec::with_capacity(padded.len() / 2);
    for pair in padded.as_bytes().chunks(2) {
        let hi = (pair[0] as char).to_digit(16)?;
        let lo = (pair[1] as char).to_digit(16)?;
        out.push((hi * 16 + lo) as u8);
    }
    Some(out)
}

fn mnemonic_byte(m: &str) -> Option<u8> {
    if let Some(n) = m.strip_prefix("dup") {
        let n: u8 = n.parse().ok()?;
        return (1..=16).contains(&n).then(|| op::DUP1 + n - 1);
    }
    if let Some(n) = m.strip_prefix("swap") {
        let n: u8 = n.parse().ok()?;
        return (1..=16).contains(&n).then(|| op::SWAP1 + n - 1);
    }
    if let Some(n) = m.strip_prefix("log") {
        let n: u8 = n.parse().ok()?;
        return (n <= 4).then(|| op::LOG0 + n);
    }
    Some(match m {
        "stop" => op::STOP,
        "add" => op::ADD,
        "mul" => op::MUL,
        "sub" => op::SUB,
        "div" => op::DIV,
        "sdiv" => op::SDIV,
        "mod" => op::MOD,
        "exp" => op::EXP,
        "lt" => op::LT,
        "gt" => op::GT,
        "slt" => op::SLT,
        "sgt" => op::SGT,
        "eq" => op::EQ,
        "iszero" => op::ISZERO,
        "and" => op::AND,
        "or" => op::OR,
        "xor" => op::XOR,
        "not" => op::NOT,
        "byte" => op::BYTE,
        "sha3" | "keccak256" => op::SHA3,
        "address" => op::ADDRESS,
        "balance" => op::BALANCE,
        "caller" => op::CALLER,
        "callvalue" => op::CALLVALUE,
        "calldataload" => op::CALLDATALOAD,
        "calldatasize" => op::CALLDATASIZE,
        "calldatacopy" => op::CALLDATACOPY,
        "codecopy" => op::CODECOPY,
        "timestamp" => op::TIMESTAMP,
        "number" => op::NUMBER,
        "pop" => op::POP,
        "mload" => op::MLOAD,
        "mstore" => op::MSTORE,
        "mstore8" => op::MSTORE8,
        "sload" => op::SLOAD,
        "sstore" => op::SSTORE,
        "jump" => op::JUMP,
        "jumpi" => op::JUMPI,
        "pc" => op::PC,
        "gas" => op::GAS,
        "jumpdest" => op::JUMPDEST,
        "create" => op::CREATE,
        "call" => op::CALL,
        "return" => op::RETURN,
        "delegatecall" => op::DELEGATECALL,
        "revert" => op::REVERT,
        "invalid" => op::INVALID,
        "selfdestruct" => op::SELFDESTRUCT,
        _ => return None,
    })
}
