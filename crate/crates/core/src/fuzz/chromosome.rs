//! Test cases and their fixed-layout bit-vector encoding.
//!
//! A chromosome is self-describing: the config block size is fixed by the
//! campaign's pool size, and each call block starts with a function index
//! that determines the argument kinds, with inline one-byte lengths for
//! dynamic values. Decoding doubles as the validity check — an offspring
//! either parses into a well-formed test case or is discarded.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::abi::codec::{mask_uint, sign_extend, TypedValue};
use crate::abi::{FunctionSpec, ParamType};
use crate::evm::world::Address;
use crate::word::{self, Word};

/// Blockchain snapshot relevant to one test case.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub block_number: Word,
    pub timestamp: Word,
    /// EOA pool records: (address, balance), balance below 2^96.
    pub accounts: Vec<(Address, Word)>,
    /// Contract addresses, the contract under test included.
    pub contract_addresses: Vec<Address>,
    /// Initial persistent storage valuation (empty: the constructor writes it).
    pub initial_storage: BTreeMap<Word, Word>,
}

impl NetworkConfig {
    /// The paper's default: block number 0, timestamp 0, contract at 0xf0,
    /// every pool account funded with 0xff00..00 wei (12 bytes).
    pub fn default_with_pool(pool: &[Address]) -> Self {
        NetworkConfig {
            block_number: Word::zero(),
            timestamp: Word::zero(),
            accounts: pool.iter().map(|a| (*a, default_balance())).collect(),
            contract_addresses: vec![Address::low(0xf0)],
            initial_storage: BTreeMap::new(),
        }
    }
}

/// `0xff` followed by eleven zero bytes: the default account balance.
pub fn default_balance() -> Word {
    Word::from(0xffu8) << 88
}

/// One function call with concrete arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Call {
    /// Index into the campaign's non-view function list; None for the
    /// constructor, which is always `calls[0]`.
    pub func_index: Option<u8>,
    pub func: FunctionSpec,
    pub args: Vec<TypedValue>,
    pub value: Word,
    pub caller: Address,
}

/// A network configuration plus a call sequence; `calls[0]` is the constructor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCase {
    pub config: NetworkConfig,
    pub calls: Vec<Call>,
}

/// Everything fixed for the duration of a campaign that encoding and
/// decoding need: the callable surface, the pool, and the sender.
#[derive(Clone, Debug)]
pub struct CampaignContext {
    pub constructor: FunctionSpec,
    /// Non-view functions, in ABI order; the chromosome function index byte
    /// indexes this list, so view functions can never appear in a test case.
    pub functions: Vec<FunctionSpec>,
    /// EOA pool supplying address-type parameter values.
    pub pool: Vec<Address>,
    /// Transaction sender for every call (the loaded attacker account).
    pub caller: Address,
    /// The sender's balance; a test case whose call values sum beyond it is
    /// invalid.
    pub caller_balance: Word,
    /// Upper bound on calls per test case, constructor included.
    pub max_calls: usize,
}

impl CampaignContext {
    pub fn config_block_len(&self) -> usize {
        16 + 32 * self.pool.len()
    }
}

/// Byte-range roles inside a chromosome, used for mutation targeting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    BlockNumber,
    Timestamp,
    /// One 32-byte pool record: 12-byte balance ++ 20-byte address.
    AccountRecord,
    FunctionIndex,
    CallValue,
    /// 32-byte word of a static argument; `is_address` marks address kinds
    /// as targets for the address dictionary.
    StaticWord { is_address: bool },
    /// One-byte length prefix; `unit` is the payload bytes per element
    /// (1 for bytes/string, the element width for arrays).
    DynamicLength { unit: usize },
    DynamicPayload,
}

#[derive(Clone, Debug)]
pub struct Segment {
    pub kind: SegmentKind,
    pub range: Range<usize>,
}

/// The bit vector plus its segment table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub bytes: Vec<u8>,
}

impl Chromosome {
    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    pub fn flip_bit(&mut self, bit: usize) {
        self.bytes[bit / 8] ^= 0x80 >> (bit % 8);
    }

    /// Single-point crossover at a bit position; pieces keep their owners'
    /// prefixes and swap suffixes.
    pub fn splice(a: &Chromosome, b: &Chromosome, cut_bit: usize) -> (Chromosome, Chromosome) {
        let take = |head: &Chromosome, tail: &Chromosome| {
            let mut out = vec![0u8; (cut_bit + tail.bit_len().saturating_sub(cut_bit)).div_ceil(8)];
            let total_bits = cut_bit + tail.bit_len().saturating_sub(cut_bit);
            for bit in 0..total_bits {
                let src = if bit < cut_bit { head } else { tail };
                if bit < src.bit_len() {
                    let byte = src.bytes[bit / 8];
                    if byte & (0x80 >> (bit % 8)) != 0 {
                        out[bit / 8] |= 0x80 >> (bit % 8);
                    }
                }
            }
            Chromosome { bytes: out }
        };
        (take(a, b), take(b, a))
    }
}

/// Encodes a test case. The caller guarantees the test case is shaped for
/// this context (pool size matches, function indices resolvable).
pub fn encode(ctx: &CampaignContext, t: &TestCase) -> Chromosome {
    let mut out = Vec::with_capacity(ctx.config_block_len() + 64 * t.calls.len());
    out.extend_from_slice(&low_n_bytes(t.config.block_number, 8));
    out.extend_from_slice(&low_n_bytes(t.config.timestamp, 8));
    debug_assert_eq!(t.config.accounts.len(), ctx.pool.len());
    for (addr, balance) in &t.config.accounts {
        out.extend_from_slice(&low_n_bytes(*balance, 12));
        out.extend_from_slice(&addr.0);
    }
    for (i, call) in t.calls.iter().enumerate() {
        if i > 0 {
            out.push(call.func_index.expect("non-constructor call needs an index"));
        }
        out.extend_from_slice(&word::to_be_bytes(call.value));
        for arg in &call.args {
            encode_arg(&mut out, arg);
        }
    }
    Chromosome { bytes: out }
}

/// Encodes one call block: optional function index, 32-byte value, args.
pub fn encode_call_block(call: &Call, with_index: bool) -> Vec<u8> {
    let mut out = Vec::new();
    if with_index {
        out.push(call.func_index.expect("non-constructor call needs an index"));
    }
    out.extend_from_slice(&word::to_be_bytes(call.value));
    for arg in &call.args {
        encode_arg(&mut out, arg);
    }
    out
}

fn encode_arg(out: &mut Vec<u8>, arg: &TypedValue) {
    match arg {
        TypedValue::Uint(v, _) | TypedValue::Int(v, _) => {
            out.extend_from_slice(&word::to_be_bytes(*v))
        }
        TypedValue::Address(a) => out.extend_from_slice(&word::to_be_bytes(a.to_word())),
        TypedValue::Bool(b) => {
            out.extend_from_slice(&word::to_be_bytes(if *b {
                Word::one()
            } else {
                Word::zero()
            }))
        }
        TypedValue::FixedBytes(b) => {
            let mut w = [0u8; 32];
            w[..b.len()].copy_from_slice(b);
            out.extend_from_slice(&w);
        }
        TypedValue::FixedArray(items) => {
            for item in items {
                encode_arg(out, item);
            }
        }
        TypedValue::Bytes(b) | TypedValue::Str(b) => {
            out.push(b.len() as u8);
            out.extend_from_slice(b);
        }
        TypedValue::Array(items) => {
            out.push(items.len() as u8);
            for item in items {
                encode_arg(out, item);
            }
        }
    }
}

/// Why a chromosome failed to decode; `decode` never yields a partial test case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invalid {
    TruncatedConfig,
    TruncatedCall,
    FunctionIndexOutOfRange,
    LengthBeyondPayload,
    TooManyCalls,
    BalanceInsufficient,
}

/// Decodes and fully validates a chromosome.
pub fn decode(ctx: &CampaignContext, c: &Chromosome) -> Result<TestCase, Invalid> {
    let mut cursor = Cursor {
        bytes: &c.bytes,
        pos: 0,
        segments: None,
    };
    decode_inner(ctx, &mut cursor)
}

/// The segment table of a chromosome, derived by parsing; fails on invalid
/// chromosomes.
pub fn segments(ctx: &CampaignContext, c: &Chromosome) -> Result<Vec<Segment>, Invalid> {
    let mut segs = Vec::new();
    let mut cursor = Cursor {
        bytes: &c.bytes,
        pos: 0,
        segments: Some(&mut segs),
    };
    decode_inner(ctx, &mut cursor)?;
    Ok(segs)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    segments: Option<&'a mut Vec<Segment>>,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, kind: SegmentKind, short: Invalid) -> Result<&'a [u8], Invalid> {
        if self.pos + n > self.bytes.len() {
            return Err(short);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        if let Some(segs) = self.segments.as_deref_mut() {
            segs.push(Segment {
                kind,
                range: self.pos..self.pos + n,
            });
        }
        self.pos += n;
        Ok(slice)
    }

    fn done(&self) -> bool {
        self.pos >= self.bytes.len()
    }
}

fn decode_inner(ctx: &CampaignContext, cur: &mut Cursor) -> Result<TestCase, Invalid> {
    let bn = word::from_be_slice(cur.take(8, SegmentKind::BlockNumber, Invalid::TruncatedConfig)?);
    let ts = word::from_be_slice(cur.take(8, SegmentKind::Timestamp, Invalid::TruncatedConfig)?);
    let mut accounts = Vec::with_capacity(ctx.pool.len());
    for _ in 0..ctx.pool.len() {
        let rec = cur.take(32, SegmentKind::AccountRecord, Invalid::TruncatedConfig)?;
        let balance = word::from_be_slice(&rec[..12]);
        let mut addr = [0u8; 20];
        addr.copy_from_slice(&rec[12..]);
        accounts.push((Address(addr), balance));
    }

    let mut calls = Vec::new();
    let mut value_sum = Word::zero();
    while !cur.done() {
        if calls.len() >= ctx.max_calls {
            return Err(Invalid::TooManyCalls);
        }
        let (func_index, func) = if calls.is_empty() {
            (None, ctx.constructor.clone())
        } else {
            let idx = cur.take(1, SegmentKind::FunctionIndex, Invalid::TruncatedCall)?[0];
            let func = ctx
                .functions
                .get(idx as usize)
                .ok_or(Invalid::FunctionIndexOutOfRange)?
                .clone();
            (Some(idx), func)
        };
        let value =
            word::from_be_slice(cur.take(32, SegmentKind::CallValue, Invalid::TruncatedCall)?);
        let mut args = Vec::with_capacity(func.inputs.len());
        for ty in &func.inputs {
            args.push(decode_arg(cur, ty)?);
        }
        value_sum = value_sum.overflowing_add(value).0;
        calls.push(Call {
            func_index,
            func,
            args,
            value,
            caller: ctx.caller,
        });
    }
    if calls.is_empty() {
        return Err(Invalid::TruncatedCall);
    }
    if value_sum > ctx.caller_balance {
        return Err(Invalid::BalanceInsufficient);
    }
    Ok(TestCase {
        config: NetworkConfig {
            block_number: bn,
            timestamp: ts,
            accounts,
            contract_addresses: vec![Address::low(0xf0)],
            initial_storage: BTreeMap::new(),
        },
        calls,
    })
}

fn decode_arg(cur: &mut Cursor, ty: &ParamType) -> Result<TypedValue, Invalid> {
    let is_address = matches!(ty, ParamType::Address);
    match ty {
        ParamType::Uint(n) => {
            let w = word::from_be_slice(cur.take(
                32,
                SegmentKind::StaticWord { is_address },
                Invalid::TruncatedCall,
            )?);
            Ok(TypedValue::Uint(mask_uint(w, *n), *n))
        }
        ParamType::Int(n) => {
            let w = word::from_be_slice(cur.take(
                32,
                SegmentKind::StaticWord { is_address },
                Invalid::TruncatedCall,
            )?);
            Ok(TypedValue::Int(sign_extend(mask_uint(w, *n), *n), *n))
        }
        ParamType::Address => {
            let w = word::from_be_slice(cur.take(
                32,
                SegmentKind::StaticWord { is_address },
                Invalid::TruncatedCall,
            )?);
            Ok(TypedValue::Address(Address::from_word(w)))
        }
        ParamType::Bool => {
            let w = word::from_be_slice(cur.take(
                32,
                SegmentKind::StaticWord { is_address },
                Invalid::TruncatedCall,
            )?);
            Ok(TypedValue::Bool(!w.is_zero()))
        }
        ParamType::FixedBytes(n) => {
            let w = cur.take(
                32,
                SegmentKind::StaticWord { is_address },
                Invalid::TruncatedCall,
            )?;
            Ok(TypedValue::FixedBytes(w[..*n].to_vec()))
        }
        ParamType::FixedArray(elem, n) => {
            let mut items = Vec::with_capacity(*n);
            for _ in 0..*n {
                items.push(decode_arg(cur, elem)?);
            }
            Ok(TypedValue::FixedArray(items))
        }
        ParamType::Bytes | ParamType::String => {
            let len = cur.take(
                1,
                SegmentKind::DynamicLength { unit: 1 },
                Invalid::TruncatedCall,
            )?[0] as usize;
            let payload = cur
                .take(len, SegmentKind::DynamicPayload, Invalid::LengthBeyondPayload)?
                .to_vec();
            Ok(if matches!(ty, ParamType::Bytes) {
                TypedValue::Bytes(payload)
            } else {
                TypedValue::Str(payload)
            })
        }
        ParamType::Array(elem) => {
            let len = cur.take(
                1,
                SegmentKind::DynamicLength {
                    unit: elem.head_size(),
                },
                Invalid::TruncatedCall,
            )?[0] as usize;
            let mut items = Vec::with_capacity(len);
            for _ in 0..len {
                items.push(decode_arg(cur, elem)?);
            }
            Ok(TypedValue::Array(items))
        }
    }
}

fn low_n_bytes(w: Word, n: usize) -> Vec<u8> {
    word::to_be_bytes(w)[32 - n..].to_vec()
}
