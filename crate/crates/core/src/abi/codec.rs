//! Standard ABI head/tail encoding of call arguments.

use crate::abi::{FunctionSpec, ParamType, DYNAMIC_BOUND};
use crate::evm::world::Address;
use crate::word::{self, Word};

/// A concrete argument value, kind-matched to a [`ParamType`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypedValue {
    /// Value and bit width; the value fits the width.
    Uint(Word, usize),
    /// Two's-complement value sign-extended to 256 bits, plus bit width.
    Int(Word, usize),
    Address(Address),
    Bool(bool),
    FixedBytes(Vec<u8>),
    Bytes(Vec<u8>),
    /// Raw string payload; fuzzed strings need not be valid UTF-8.
    Str(Vec<u8>),
    Array(Vec<TypedValue>),
    FixedArray(Vec<TypedValue>),
}

impl TypedValue {
    pub fn matches(&self, ty: &ParamType) -> bool {
        match (self, ty) {
            (TypedValue::Uint(_, w), ParamType::Uint(n)) => w == n,
            (TypedValue::Int(_, w), ParamType::Int(n)) => w == n,
            (TypedValue::Address(_), ParamType::Address) => true,
            (TypedValue::Bool(_), ParamType::Bool) => true,
            (TypedValue::FixedBytes(b), ParamType::FixedBytes(n)) => b.len() == *n,
            (TypedValue::Bytes(_), ParamType::Bytes) => true,
            (TypedValue::Str(_), ParamType::String) => true,
            (TypedValue::Array(items), ParamType::Array(e)) => {
                items.iter().all(|i| i.matches(e))
            }
            (TypedValue::FixedArray(items), ParamType::FixedArray(e, n)) => {
                items.len() == *n && items.iter().all(|i| i.matches(e))
            }
            _ => false,
        }
    }

    /// Hex rendering for report files.
    pub fn to_hex_string(&self) -> String {
        fn hex(bytes: &[u8]) -> String {
            let mut s = String::with_capacity(2 + bytes.len() * 2);
            s.push_str("0x");
            for b in bytes {
                s.push_str(&format!("{b:02x}"));
            }
            s
        }
        match self {
            TypedValue::Uint(v, _) | TypedValue::Int(v, _) => word::to_hex(*v),
            TypedValue::Address(a) => a.to_hex(),
            TypedValue::Bool(b) => if *b { "0x01" } else { "0x00" }.to_string(),
            TypedValue::FixedBytes(b) | TypedValue::Bytes(b) | TypedValue::Str(b) => hex(b),
            TypedValue::Array(items) | TypedValue::FixedArray(items) => {
                let inner: Vec<String> = items.iter().map(|i| i.to_hex_string()).collect();
                format!("[{}]", inner.join(","))
            }
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("argument arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("argument {index} does not match its declared kind")]
    KindMismatch { index: usize },
    #[error("dynamic length {len} exceeds the bound of {DYNAMIC_BOUND}")]
    LengthBound { len: usize },
    #[error("call data too short")]
    Truncated,
    #[error("selector does not match the function")]
    SelectorMismatch,
    #[error("malformed offset or length word")]
    BadOffset,
}

/// Encodes a call: selector followed by head/tail argument encoding.
/// Constructors get no selector (their arguments are appended to init code).
pub fn encode_call(f: &FunctionSpec, args: &[TypedValue]) -> Result<Vec<u8>, CodecError> {
    if args.len() != f.inputs.len() {
        return Err(CodecError::Arity {
            expected: f.inputs.len(),
            got: args.len(),
        });
    }
    for (i, (arg, ty)) in args.iter().zip(&f.inputs).enumerate() {
        if !arg.matches(ty) {
            return Err(CodecError::KindMismatch { index: i });
        }
    }
    let mut out = Vec::new();
    if !f.is_constructor {
        out.extend_from_slice(&f.selector);
    }
    out.extend(encode_args(&f.inputs, args)?);
    Ok(out)
}

/// Decodes call data back into typed values, checking the selector.
pub fn decode_call(f: &FunctionSpec, data: &[u8]) -> Result<Vec<TypedValue>, CodecError> {
    let body = if f.is_constructor {
        data
    } else {
        if data.len() < 4 {
            return Err(CodecError::Truncated);
        }
        if data[..4] != f.selector {
            return Err(CodecError::SelectorMismatch);
        }
        &data[4..]
    };
    decode_args(&f.inputs, body)
}

pub fn encode_args(params: &[ParamType], args: &[TypedValue]) -> Result<Vec<u8>, CodecError> {
    let head_size: usize = params.iter().map(|p| p.head_size()).sum();
    let mut head = Vec::with_capacity(head_size);
    let mut tail = Vec::new();
    for (ty, arg) in params.iter().zip(args) {
        if ty.is_dynamic() {
            let offset = head_size + tail.len();
            head.extend_from_slice(&word::to_be_bytes(Word::from(offset)));
            tail.extend(encode_tail(arg)?);
        } else {
            head.extend(encode_static(arg));
        }
    }
    head.extend(tail);
    Ok(head)
}

fn encode_static(arg: &TypedValue) -> Vec<u8> {
    match arg {
        TypedValue::Uint(v, _) | TypedValue::Int(v, _) => word::to_be_bytes(*v).to_vec(),
        TypedValue::Address(a) => word::to_be_bytes(a.to_word()).to_vec(),
        TypedValue::Bool(b) => {
            word::to_be_bytes(if *b { Word::one() } else { Word::zero() }).to_vec()
        }
        TypedValue::FixedBytes(b) => {
            // Right-padded into one word.
            let mut out = [0u8; 32];
            out[..b.len()].copy_from_slice(b);
            out.to_vec()
        }
        TypedValue::FixedArray(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(encode_static(item));
            }
            out
        }
        _ => unreachable!("dynamic value in static position"),
    }
}

fn encode_tail(arg: &TypedValue) -> Result<Vec<u8>, CodecError> {
    match arg {
        TypedValue::Bytes(b) | TypedValue::Str(b) => {
            if b.len() > DYNAMIC_BOUND {
                return Err(CodecError::LengthBound { len: b.len() });
            }
            let mut out = word::to_be_bytes(Word::from(b.len())).to_vec();
            out.extend_from_slice(b);
            let pad = b.len().div_ceil(32) * 32 - b.len();
            out.extend(std::iter::repeat(0u8).take(pad));
            Ok(out)
        }
        TypedValue::Array(items) => {
            if items.len() > DYNAMIC_BOUND {
                return Err(CodecError::LengthBound { len: items.len() });
            }
            let mut out = word::to_be_bytes(Word::from(items.len())).to_vec();
            for item in items {
                out.extend(encode_static(item));
            }
            Ok(out)
        }
        _ => unreachable!("static value in tail position"),
    }
}

pub fn decode_args(params: &[ParamType], body: &[u8]) -> Result<Vec<TypedValue>, CodecError> {
    let mut out = Vec::with_capacity(params.len());
    let mut head_pos = 0usize;
    for ty in params {
        if ty.is_dynamic() {
            let offset = read_offset(body, head_pos)?;
            out.push(decode_tail(ty, body, offset)?);
            head_pos += 32;
        } else {
            out.push(decode_static(ty, body, &mut head_pos)?);
        }
    }
    Ok(out)
}

fn read_word(body: &[u8], pos: usize) -> Result<Word, CodecError> {
    let end = pos.checked_add(32).ok_or(CodecError::BadOffset)?;
    if end > body.len() {
        return Err(CodecError::Truncated);
    }
    Ok(word::from_be_slice(&body[pos..end]))
}

fn read_offset(body: &[u8], pos: usize) -> Result<usize, CodecError> {
    let w = read_word(body, pos)?;
    if w > Word::from(body.len()) {
        return Err(CodecError::BadOffset);
    }
    Ok(w.as_usize())
}

fn decode_static(ty: &ParamType, body: &[u8], pos: &mut usize) -> Result<TypedValue, CodecError> {
    let value = match ty {
        ParamType::Uint(n) => {
            let w = read_word(body, *pos)?;
            *pos += 32;
            TypedValue::Uint(mask_uint(w, *n), *n)
        }
        ParamType::Int(n) => {
            let w = read_word(body, *pos)?;
            *pos += 32;
            TypedValue::Int(sign_extend(mask_uint(w, *n), *n), *n)
        }
        ParamType::Address => {
            let w = read_word(body, *pos)?;
            *pos += 32;
            TypedValue::Address(Address::from_word(w))
        }
        ParamType::Bool => {
            let w = read_word(body, *pos)?;
            *pos += 32;
            TypedValue::Bool(!w.is_zero())
        }
        ParamType::FixedBytes(n) => {
            let w = read_word(body, *pos)?;
            *pos += 32;
            TypedValue::FixedBytes(word::to_be_bytes(w)[..*n].to_vec())
        }
        ParamType::FixedArray(e, n) => {
            let mut items = Vec::with_capacity(*n);
            for _ in 0..*n {
                items.push(decode_static(e, body, pos)?);
            }
            TypedValue::FixedArray(items)
        }
        _ => unreachable!("dynamic type in static decode"),
    };
    Ok(value)
}

fn decode_tail(ty: &ParamType, body: &[u8], offset: usize) -> Result<TypedValue, CodecError> {
    let len_word = read_word(body, offset)?;
    if len_word > Word::from(DYNAMIC_BOUND) {
        return Err(CodecError::LengthBound {
            len: len_word.min(Word::from(usize::MAX as u64)).as_usize(),
        });
    }
    let len = len_word.as_usize();
    match ty {
        ParamType::Bytes | ParamType::String => {
            let start = offset + 32;
            if start + len > body.len() {
                return Err(CodecError::Truncated);
            }
            let payload = body[start..start + len].to_vec();
            Ok(if matches!(ty, ParamType::Bytes) {
                TypedValue::Bytes(payload)
            } else {
                TypedValue::Str(payload)
            })
        }
        ParamType::Array(e) => {
            let mut pos = offset + 32;
            let mut items = Vec::with_capacity(len);
            for _ in 0..len {
                items.push(decode_static(e, body, &mut pos)?);
            }
            Ok(TypedValue::Array(items))
        }
        _ => unreachable!("static type in tail decode"),
    }
}

/// Masks a word to its low `bits`.
pub fn mask_uint(w: Word, bits: usize) -> Word {
    if bits >= 256 {
        w
    } else {
        w & ((Word::one() << bits) - Word::one())
    }
}

/// Sign-extends the low `bits` of a word to 256 bits.
pub fn sign_extend(w: Word, bits: usize) -> Word {
    if bits >= 256 || !w.bit(bits - 1) {
        w
    } else {
        w | !((Word::one() << bits) - Word::one())
    }
}
