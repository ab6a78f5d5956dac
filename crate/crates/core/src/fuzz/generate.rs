//! Random test-case generation: typed parameter values and the initial
//! population (one sequence per fuzzable function, constructor first).

use rand::Rng;

use crate::abi::codec::{mask_uint, sign_extend, TypedValue};
use crate::abi::ParamType;
use crate::evm::world::Address;
use crate::fuzz::chromosome::{Call, CampaignContext, NetworkConfig, TestCase};
use crate::word::Word;

/// Values worth trying verbatim, adopted from the AFL lineage.
pub fn interesting_words() -> Vec<Word> {
    vec![
        Word::zero(),
        Word::one(),
        Word::MAX, // -1 in two's complement
        Word::from(16u8),
        Word::from(32u8),
        Word::from(64u8),
        Word::from(100u8),
        Word::from(127u8),
        Word::from(128u8),
        Word::from(255u16),
        Word::from(256u16),
        Word::from((1u64 << 15) - 1),
        Word::from(1u64 << 16),
        Word::from((1u64 << 31) - 1),
        Word::from(1u64 << 32),
        Word::one() << 255,
    ]
}

fn random_word<R: Rng>(rng: &mut R, bits: usize) -> Word {
    let mut bytes = [0u8; 32];
    let n = bits.div_ceil(8);
    rng.fill(&mut bytes[32 - n..]);
    mask_uint(Word::from_big_endian(&bytes), bits)
}

/// A random value for one parameter, based on its type.
///
/// Fixed-size integers draw from a mixture of zero, the interesting set and
/// uniform words; dynamic values get a uniform length in [0, 255] with
/// zero-initialized payloads, leaving content to the mutation stages.
pub fn random_value<R: Rng>(ty: &ParamType, pool: &[Address], rng: &mut R) -> TypedValue {
    match ty {
        ParamType::Uint(n) => TypedValue::Uint(random_scalar(rng, *n), *n),
        ParamType::Int(n) => TypedValue::Int(sign_extend(random_scalar(rng, *n), *n), *n),
        ParamType::Address => {
            let i = rng.gen_range(0..pool.len().max(1));
            TypedValue::Address(pool.get(i).copied().unwrap_or(Address::ZERO))
        }
        ParamType::Bool => TypedValue::Bool(rng.gen()),
        ParamType::FixedBytes(n) => {
            let mut b = vec![0u8; *n];
            if rng.gen_bool(0.5) {
                rng.fill(&mut b[..]);
            }
            TypedValue::FixedBytes(b)
        }
        ParamType::Bytes => TypedValue::Bytes(vec![0u8; rng.gen_range(0..=255)]),
        ParamType::String => TypedValue::Str(vec![0u8; rng.gen_range(0..=255)]),
        ParamType::Array(elem) => {
            let len = rng.gen_range(0..=255usize);
            TypedValue::Array((0..len).map(|_| random_value(elem, pool, rng)).collect())
        }
        ParamType::FixedArray(elem, n) => {
            TypedValue::FixedArray((0..*n).map(|_| random_value(elem, pool, rng)).collect())
        }
    }
}

fn random_scalar<R: Rng>(rng: &mut R, bits: usize) -> Word {
    match rng.gen_range(0..4u8) {
        0 => Word::zero(),
        1 => {
            let set = interesting_words();
            mask_uint(set[rng.gen_range(0..set.len())], bits)
        }
        _ => random_word(rng, bits),
    }
}

/// A random call value: uniform below 2^96 for payable functions (the
/// 12-byte balance format bounds what is fundable), zero otherwise.
pub fn random_call_value<R: Rng>(rng: &mut R, payable: bool) -> Word {
    if payable {
        random_word(rng, 96)
    } else {
        Word::zero()
    }
}

/// A fresh call to function `index` of the context.
pub fn random_call<R: Rng>(ctx: &CampaignContext, index: u8, rng: &mut R) -> Call {
    let func = ctx.functions[index as usize].clone();
    let args = func
        .inputs
        .iter()
        .map(|ty| random_value(ty, &ctx.pool, rng))
        .collect();
    let value = random_call_value(rng, func.is_payable());
    Call {
        func_index: Some(index),
        func,
        args,
        value,
        caller: ctx.caller,
    }
}

fn random_constructor_call<R: Rng>(ctx: &CampaignContext, rng: &mut R) -> Call {
    let func = ctx.constructor.clone();
    let args = func
        .inputs
        .iter()
        .map(|ty| random_value(ty, &ctx.pool, rng))
        .collect();
    let value = random_call_value(rng, func.is_payable());
    Call {
        func_index: None,
        func,
        args,
        value,
        caller: ctx.caller,
    }
}

/// One test case per fuzzable function, each calling that function once after
/// the constructor, so function coverage of the initial suite is complete.
/// With no fuzzable functions the campaign degenerates to constructor-only
/// fuzzing.
pub fn init_population<R: Rng>(ctx: &CampaignContext, rng: &mut R) -> Vec<TestCase> {
    let config = NetworkConfig::default_with_pool(&ctx.pool);
    if ctx.functions.is_empty() {
        return vec![TestCase {
            config,
            calls: vec![random_constructor_call(ctx, rng)],
        }];
    }
    (0..ctx.functions.len())
        .map(|i| TestCase {
            config: config.clone(),
            calls: vec![
                random_constructor_call(ctx, rng),
                random_call(ctx, i as u8, rng),
            ],
        })
        .collect()
}
