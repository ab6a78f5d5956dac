//! The mutation operators and the value dictionary.
//!
//! Method-call operators reshape the call sequence; walking, arith and
//! interest operators act on the value bytes only (function indices and
//! length prefixes are never touched by them); lengths change exclusively
//! through the dedicated resize operator, which truncates or zero-pads the
//! payload so the length invariant is preserved.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::seq::index::sample;
use rand::Rng;

use crate::evm::opcode;
use crate::evm::world::Address;
use crate::fuzz::chromosome::{
    encode_call_block, segments, CampaignContext, Chromosome, Segment, SegmentKind,
};
use crate::fuzz::generate::{interesting_words, random_call};
use crate::word::{self, Word};

/// Maximum delta applied by the arith operators.
pub const ARITH_MAX_DELTA: u64 = 35;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MutationOp {
    PruneMethodCall,
    AddMethodCall,
    SwapMethodCall,
    SingleWalkingBit,
    TwoWalkingBit,
    FourWalkingBit,
    SingleWalkingByte,
    TwoWalkingByte,
    FourWalkingByte,
    SingleArith,
    TwoArith,
    FourArith,
    SingleInterest,
    TwoInterest,
    FourInterest,
    OverwriteWithDictionary,
    OverwriteWithAddressDictionary,
    /// Variable-length values: re-roll the length uniformly in [0, 255],
    /// truncating or zero-padding the payload.
    ResizeDynamic,
}

impl MutationOp {
    pub fn name(self) -> &'static str {
        match self {
            MutationOp::PruneMethodCall => "pruneMethodCall",
            MutationOp::AddMethodCall => "addMethodCall",
            MutationOp::SwapMethodCall => "swapMethodCall",
            MutationOp::SingleWalkingBit => "singleWalkingBit",
            MutationOp::TwoWalkingBit => "twoWalkingBit",
            MutationOp::FourWalkingBit => "fourWalkingBit",
            MutationOp::SingleWalkingByte => "singleWalkingByte",
            MutationOp::TwoWalkingByte => "twoWalkingByte",
            MutationOp::FourWalkingByte => "fourWalkingByte",
            MutationOp::SingleArith => "singleArith",
            MutationOp::TwoArith => "twoArith",
            MutationOp::FourArith => "fourArith",
            MutationOp::SingleInterest => "singleInterest",
            MutationOp::TwoInterest => "twoInterest",
            MutationOp::FourInterest => "fourInterest",
            MutationOp::OverwriteWithDictionary => "overwriteWithDictionary",
            MutationOp::OverwriteWithAddressDictionary => "overwriteWithAddressDictionary",
            MutationOp::ResizeDynamic => "resizeDynamic",
        }
    }

    /// Whether the effector map gates this operator. Walking stages are the
    /// probes that build the map, so they always run; structural operators
    /// do not touch value bytes at all.
    pub fn respects_effector(self) -> bool {
        matches!(
            self,
            MutationOp::SingleArith
                | MutationOp::TwoArith
                | MutationOp::FourArith
                | MutationOp::SingleInterest
                | MutationOp::TwoInterest
                | MutationOp::FourInterest
                | MutationOp::OverwriteWithDictionary
        )
    }
}

/// Stage weights: single-width value stages carry most of the schedule, the
/// way AFL's deterministic phases dominate its cycle.
pub const SCHEDULE: [(MutationOp, u32); 18] = [
    (MutationOp::SingleWalkingBit, 14),
    (MutationOp::SingleArith, 16),
    (MutationOp::SingleInterest, 12),
    (MutationOp::OverwriteWithDictionary, 10),
    (MutationOp::SingleWalkingByte, 8),
    (MutationOp::ResizeDynamic, 8),
    (MutationOp::TwoArith, 6),
    (MutationOp::FourArith, 5),
    (MutationOp::AddMethodCall, 4),
    (MutationOp::TwoWalkingBit, 3),
    (MutationOp::TwoInterest, 3),
    (MutationOp::FourWalkingBit, 2),
    (MutationOp::TwoWalkingByte, 2),
    (MutationOp::FourWalkingByte, 2),
    (MutationOp::FourInterest, 2),
    (MutationOp::PruneMethodCall, 1),
    (MutationOp::SwapMethodCall, 1),
    (MutationOp::OverwriteWithAddressDictionary, 1),
];

/// Draws the next stage for a seed.
pub fn pick_op<R: Rng>(rng: &mut R) -> MutationOp {
    let total: u32 = SCHEDULE.iter().map(|(_, w)| w).sum();
    let mut roll = rng.gen_range(0..total);
    for (op, w) in SCHEDULE {
        if roll < w {
            return op;
        }
        roll -= w;
    }
    MutationOp::SingleWalkingBit
}

/// Byte tokens for overwrite mutations: the AFL-lineage interesting values
/// plus every PUSH operand harvested from the bytecode, and the account-pool
/// records for the address dictionary.
#[derive(Clone, Debug, Default)]
pub struct Dictionary {
    pub tokens: Vec<Vec<u8>>,
    pub records: Vec<[u8; 32]>,
}

impl Dictionary {
    pub fn build(bytecodes: &[&[u8]], pool: &[(Address, Word)]) -> Self {
        let mut tokens: BTreeSet<Vec<u8>> = BTreeSet::new();
        for w in interesting_words() {
            tokens.insert(minimal_be(w));
        }
        tokens.insert(word::to_be_bytes(Word::MAX).to_vec());
        tokens.insert(word::to_be_bytes(Word::one() << 255).to_vec());
        for code in bytecodes {
            let mut pc = 0usize;
            while pc < code.len() {
                let op = code[pc];
                let n = opcode::push_bytes(op);
                if n > 0 && pc + n < code.len() {
                    tokens.insert(code[pc + 1..pc + 1 + n].to_vec());
                }
                pc += 1 + n;
            }
        }
        let records = pool
            .iter()
            .map(|(addr, balance)| {
                let mut rec = [0u8; 32];
                rec[..12].copy_from_slice(&word::to_be_bytes(*balance)[20..]);
                rec[12..].copy_from_slice(&addr.0);
                rec
            })
            .collect();
        Dictionary {
            tokens: tokens.into_iter().collect(),
            records,
        }
    }
}

fn minimal_be(w: Word) -> Vec<u8> {
    let bytes = word::to_be_bytes(w);
    let first = bytes.iter().position(|b| *b != 0).unwrap_or(31);
    bytes[first..].to_vec()
}

/// Interesting values that fit a window of `width` bytes, minimally encoded
/// then zero-extended to the window.
fn interesting_for_width(width: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for w in interesting_words() {
        if w == Word::MAX {
            out.push(vec![0xff; width]);
            continue;
        }
        let min = minimal_be(w);
        if min.len() <= width {
            let mut v = vec![0u8; width - min.len()];
            v.extend_from_slice(&min);
            out.push(v);
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Offspring of one operator application, with the 32-byte block each
/// offspring's edit starts in (None for structural edits) and the blocks the
/// effector map suppressed.
#[derive(Debug, Default)]
pub struct MutationBatch {
    pub offspring: Vec<Chromosome>,
    pub blocks: Vec<Option<u32>>,
    pub skipped_blocks: Vec<u32>,
}

impl MutationBatch {
    fn push(&mut self, c: Chromosome, block: Option<u32>) {
        self.offspring.push(c);
        self.blocks.push(block);
    }
}

/// Applies one operator to a valid chromosome, emitting at most `budget`
/// offspring (the full walk when it fits, otherwise a uniform sample of it).
pub fn mutate<R: Rng>(
    ctx: &CampaignContext,
    c: &Chromosome,
    op: MutationOp,
    rng: &mut R,
    dict: &Dictionary,
    effector_skip: &BTreeSet<u32>,
    budget: usize,
) -> MutationBatch {
    let Ok(segs) = segments(ctx, c) else {
        return MutationBatch::default();
    };
    let mut batch = MutationBatch::default();
    let empty = BTreeSet::new();
    let skip = if op.respects_effector() {
        effector_skip
    } else {
        &empty
    };
    let runs = value_runs(&segs, skip, &mut batch.skipped_blocks);

    match op {
        MutationOp::SingleWalkingBit => walking_bits(c, &runs, 1, rng, budget, &mut batch),
        MutationOp::TwoWalkingBit => walking_bits(c, &runs, 2, rng, budget, &mut batch),
        MutationOp::FourWalkingBit => walking_bits(c, &runs, 4, rng, budget, &mut batch),
        MutationOp::SingleWalkingByte => walking_bytes(c, &runs, 1, rng, budget, &mut batch),
        MutationOp::TwoWalkingByte => walking_bytes(c, &runs, 2, rng, budget, &mut batch),
        MutationOp::FourWalkingByte => walking_bytes(c, &runs, 4, rng, budget, &mut batch),
        MutationOp::SingleArith => arith(c, &runs, 1, rng, budget, &mut batch),
        MutationOp::TwoArith => arith(c, &runs, 2, rng, budget, &mut batch),
        MutationOp::FourArith => arith(c, &runs, 4, rng, budget, &mut batch),
        MutationOp::SingleInterest => interest(c, &runs, 1, rng, budget, &mut batch),
        MutationOp::TwoInterest => interest(c, &runs, 2, rng, budget, &mut batch),
        MutationOp::FourInterest => interest(c, &runs, 4, rng, budget, &mut batch),
        MutationOp::OverwriteWithDictionary => {
            dictionary_overwrite(c, &runs, dict, rng, budget, &mut batch)
        }
        MutationOp::OverwriteWithAddressDictionary => {
            address_overwrite(c, &segs, dict, rng, budget, &mut batch)
        }
        MutationOp::PruneMethodCall => prune_calls(c, &segs, &mut batch),
        MutationOp::AddMethodCall => add_call(ctx, c, &segs, rng, budget, &mut batch),
        MutationOp::SwapMethodCall => swap_calls(c, &segs, &mut batch),
        MutationOp::ResizeDynamic => resize_dynamic(c, &segs, rng, &mut batch),
    }
    batch
}

/// Maximal contiguous byte ranges holding mutable values, the effector map
/// already applied.
fn value_runs(
    segs: &[Segment],
    skip: &BTreeSet<u32>,
    skipped_out: &mut Vec<u32>,
) -> Vec<Range<usize>> {
    let mut positions: Vec<usize> = Vec::new();
    for seg in segs {
        let mutable = matches!(
            seg.kind,
            SegmentKind::BlockNumber
                | SegmentKind::Timestamp
                | SegmentKind::AccountRecord
                | SegmentKind::CallValue
                | SegmentKind::StaticWord { .. }
                | SegmentKind::DynamicPayload
        );
        if !mutable {
            continue;
        }
        for pos in seg.range.clone() {
            let block = (pos / 32) as u32;
            if skip.contains(&block) {
                if skipped_out.last() != Some(&block) {
                    skipped_out.push(block);
                }
                continue;
            }
            positions.push(pos);
        }
    }
    positions.sort_unstable();
    positions.dedup();
    let mut runs: Vec<Range<usize>> = Vec::new();
    for pos in positions {
        match runs.last_mut() {
            Some(run) if run.end == pos => run.end = pos + 1,
            _ => runs.push(pos..pos + 1),
        }
    }
    runs
}

fn chosen<R: Rng>(total: usize, budget: usize, rng: &mut R) -> Vec<usize> {
    if total <= budget {
        (0..total).collect()
    } else {
        let mut idx = sample(rng, total, budget).into_vec();
        idx.sort_unstable();
        idx
    }
}

fn walking_bits<R: Rng>(
    c: &Chromosome,
    runs: &[Range<usize>],
    width: usize,
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    let mut starts: Vec<usize> = Vec::new();
    for run in runs {
        let bits = run.len() * 8;
        if bits < width {
            continue;
        }
        let base = run.start * 8;
        starts.extend((0..=bits - width).map(|i| base + i));
    }
    for i in chosen(starts.len(), budget, rng) {
        let start = starts[i];
        let mut child = c.clone();
        for b in start..start + width {
            child.flip_bit(b);
        }
        batch.push(child, Some((start / 8 / 32) as u32));
    }
}

fn walking_bytes<R: Rng>(
    c: &Chromosome,
    runs: &[Range<usize>],
    width: usize,
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    let mut starts: Vec<usize> = Vec::new();
    for run in runs {
        if run.len() < width {
            continue;
        }
        starts.extend(run.start..=run.end - width);
    }
    for i in chosen(starts.len(), budget, rng) {
        let start = starts[i];
        let mut child = c.clone();
        for b in &mut child.bytes[start..start + width] {
            *b ^= 0xff;
        }
        batch.push(child, Some((start / 32) as u32));
    }
}

fn arith<R: Rng>(
    c: &Chromosome,
    runs: &[Range<usize>],
    width: usize,
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    let mut starts: Vec<usize> = Vec::new();
    for run in runs {
        if run.len() < width {
            continue;
        }
        starts.extend(run.start..=run.end - width);
    }
    let deltas = ARITH_MAX_DELTA as usize;
    let total = starts.len() * deltas * 2;
    for v in chosen(total, budget, rng) {
        let start = starts[v / (deltas * 2)];
        let delta = (v / 2) % deltas + 1;
        let add = v % 2 == 0;
        let mut child = c.clone();
        window_arith(&mut child.bytes[start..start + width], delta as u64, add);
        batch.push(child, Some((start / 32) as u32));
    }
}

/// Adds or subtracts a delta on a big-endian window, wrapping within it.
fn window_arith(window: &mut [u8], delta: u64, add: bool) {
    let mut value: u64 = 0;
    for b in window.iter() {
        value = (value << 8) | *b as u64;
    }
    let bits = window.len() * 8;
    let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
    value = if add {
        value.wrapping_add(delta)
    } else {
        value.wrapping_sub(delta)
    } & mask;
    for b in window.iter_mut().rev() {
        *b = value as u8;
        value >>= 8;
    }
}

fn interest<R: Rng>(
    c: &Chromosome,
    runs: &[Range<usize>],
    width: usize,
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    let values = interesting_for_width(width);
    if values.is_empty() {
        return;
    }
    let mut starts: Vec<usize> = Vec::new();
    for run in runs {
        if run.len() < width {
            continue;
        }
        starts.extend(run.start..=run.end - width);
    }
    let total = starts.len() * values.len();
    for v in chosen(total, budget, rng) {
        let start = starts[v / values.len()];
        let value = &values[v % values.len()];
        let mut child = c.clone();
        child.bytes[start..start + width].copy_from_slice(value);
        batch.push(child, Some((start / 32) as u32));
    }
}

fn dictionary_overwrite<R: Rng>(
    c: &Chromosome,
    runs: &[Range<usize>],
    dict: &Dictionary,
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    let mut variants: Vec<(usize, usize)> = Vec::new();
    for (t, token) in dict.tokens.iter().enumerate() {
        for run in runs {
            if run.len() < token.len() {
                continue;
            }
            variants.extend((run.start..=run.end - token.len()).map(|p| (t, p)));
        }
    }
    for v in chosen(variants.len(), budget, rng) {
        let (t, pos) = variants[v];
        let token = &dict.tokens[t];
        let mut child = c.clone();
        child.bytes[pos..pos + token.len()].copy_from_slice(token);
        batch.push(child, Some((pos / 32) as u32));
    }
}

fn address_overwrite<R: Rng>(
    c: &Chromosome,
    segs: &[Segment],
    dict: &Dictionary,
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    if dict.records.is_empty() {
        return;
    }
    let targets: Vec<&Segment> = segs
        .iter()
        .filter(|s| {
            matches!(
                s.kind,
                SegmentKind::AccountRecord | SegmentKind::StaticWord { is_address: true }
            ) && s.range.len() == 32
        })
        .collect();
    let total = targets.len() * dict.records.len();
    for v in chosen(total, budget, rng) {
        let seg = targets[v / dict.records.len()];
        let rec = &dict.records[v % dict.records.len()];
        let mut child = c.clone();
        child.bytes[seg.range.clone()].copy_from_slice(rec);
        batch.push(child, Some((seg.range.start / 32) as u32));
    }
}

/// Byte range of each call block (index 0 is the constructor block).
fn call_ranges(segs: &[Segment]) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = Vec::new();
    for seg in segs {
        match seg.kind {
            SegmentKind::FunctionIndex => out.push(seg.range.clone()),
            SegmentKind::CallValue if out.is_empty() => out.push(seg.range.clone()),
            SegmentKind::CallValue
            | SegmentKind::StaticWord { .. }
            | SegmentKind::DynamicLength { .. }
            | SegmentKind::DynamicPayload => {
                if let Some(last) = out.last_mut() {
                    last.end = seg.range.end;
                }
            }
            _ => {}
        }
    }
    out
}

fn prune_calls(c: &Chromosome, segs: &[Segment], batch: &mut MutationBatch) {
    let ranges = call_ranges(segs);
    // the constructor (block 0) is never pruned
    for range in ranges.iter().skip(1) {
        let mut bytes = Vec::with_capacity(c.bytes.len() - range.len());
        bytes.extend_from_slice(&c.bytes[..range.start]);
        bytes.extend_from_slice(&c.bytes[range.end..]);
        batch.push(Chromosome { bytes }, None);
    }
}

fn add_call<R: Rng>(
    ctx: &CampaignContext,
    c: &Chromosome,
    segs: &[Segment],
    rng: &mut R,
    budget: usize,
    batch: &mut MutationBatch,
) {
    if ctx.functions.is_empty() {
        return;
    }
    let ranges = call_ranges(segs);
    if ranges.is_empty() || ranges.len() >= ctx.max_calls {
        return;
    }
    for _ in 0..budget.min(2) {
        let call = random_call(ctx, rng.gen_range(0..ctx.functions.len()) as u8, rng);
        let block = encode_call_block(&call, true);
        // insert after any existing call block, never before the constructor
        let at = ranges[rng.gen_range(0..ranges.len())].end;
        let mut bytes = Vec::with_capacity(c.bytes.len() + block.len());
        bytes.extend_from_slice(&c.bytes[..at]);
        bytes.extend_from_slice(&block);
        bytes.extend_from_slice(&c.bytes[at..]);
        batch.push(Chromosome { bytes }, None);
    }
}

fn swap_calls(c: &Chromosome, segs: &[Segment], batch: &mut MutationBatch) {
    let ranges = call_ranges(segs);
    for i in 1..ranges.len() {
        for j in i + 1..ranges.len() {
            let mut bytes = Vec::with_capacity(c.bytes.len());
            bytes.extend_from_slice(&c.bytes[..ranges[i].start]);
            bytes.extend_from_slice(&c.bytes[ranges[j].clone()]);
            bytes.extend_from_slice(&c.bytes[ranges[i].end..ranges[j].start]);
            bytes.extend_from_slice(&c.bytes[ranges[i].clone()]);
            bytes.extend_from_slice(&c.bytes[ranges[j].end..]);
            batch.push(Chromosome { bytes }, None);
        }
    }
}

fn resize_dynamic<R: Rng>(
    c: &Chromosome,
    segs: &[Segment],
    rng: &mut R,
    batch: &mut MutationBatch,
) {
    for (i, seg) in segs.iter().enumerate() {
        let SegmentKind::DynamicLength { unit } = seg.kind else {
            continue;
        };
        let old_len = c.bytes[seg.range.start] as usize;
        // the payload segment follows the length byte immediately
        let payload = segs
            .get(i + 1)
            .filter(|s| s.kind == SegmentKind::DynamicPayload)
            .map(|s| s.range.clone())
            .unwrap_or(seg.range.end..seg.range.end);
        let old_bytes = old_len * unit;
        debug_assert_eq!(payload.len(), old_bytes);
        // several fresh lengths per segment, like the multi-delta arith walks
        let mut lengths = BTreeSet::new();
        while lengths.len() < 4 {
            lengths.insert(rng.gen_range(0..=255usize));
        }
        for new_len in lengths {
            if new_len == old_len {
                continue;
            }
            let new_bytes = new_len * unit;
            let keep = old_bytes.min(new_bytes);
            let mut bytes = Vec::with_capacity(c.bytes.len() - old_bytes + new_bytes);
            bytes.extend_from_slice(&c.bytes[..seg.range.start]);
            bytes.push(new_len as u8);
            bytes.extend_from_slice(&c.bytes[payload.start..payload.start + keep]);
            bytes.extend(std::iter::repeat(0u8).take(new_bytes - keep));
            bytes.extend_from_slice(&c.bytes[payload.end..]);
            batch.push(Chromosome { bytes }, None);
        }
    }
}
