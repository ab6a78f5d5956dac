//! 256-bit machine words and the arithmetic the interpreter needs.
//!
//! All arithmetic is modulo 2^256. Signed comparisons and signed division
//! reinterpret words as two's complement.

pub use primitive_types::{U256, U512};

/// A 256-bit EVM word.
pub type Word = U256;

/// Sign bit mask (bit 255).
pub fn sign_bit(x: Word) -> bool {
    x.bit(255)
}

/// Wrapping addition.
pub fn add(a: Word, b: Word) -> Word {
    a.overflowing_add(b).0
}

/// Wrapping multiplication.
pub fn mul(a: Word, b: Word) -> Word {
    a.overflowing_mul(b).0
}

/// Wrapping subtraction: `a - b` where `a` was popped first.
pub fn sub(a: Word, b: Word) -> Word {
    a.overflowing_sub(b).0
}

/// Unsigned division; division by zero yields zero.
pub fn div(a: Word, b: Word) -> Word {
    if b.is_zero() {
        Word::zero()
    } else {
        a / b
    }
}

/// Unsigned modulo; modulo zero yields zero.
pub fn rem(a: Word, b: Word) -> Word {
    if b.is_zero() {
        Word::zero()
    } else {
        a % b
    }
}

/// Two's-complement negation.
pub fn neg(x: Word) -> Word {
    (!x).overflowing_add(Word::one()).0
}

/// Signed division per EVM semantics: truncated toward zero,
/// `MIN / -1 = MIN`, division by zero yields zero.
pub fn sdiv(a: Word, b: Word) -> Word {
    if b.is_zero() {
        return Word::zero();
    }
    let (na, nb) = (sign_bit(a), sign_bit(b));
    let abs_a = if na { neg(a) } else { a };
    let abs_b = if nb { neg(b) } else { b };
    let q = div(abs_a, abs_b);
    if na ^ nb {
        neg(q)
    } else {
        q
    }
}

/// Wrapping exponentiation `a^b`.
pub fn exp(a: Word, b: Word) -> Word {
    a.overflowing_pow(b).0
}

/// Signed less-than over two's-complement words.
pub fn slt(a: Word, b: Word) -> bool {
    // Flipping the sign bit maps two's-complement order onto unsigned order.
    (a ^ sign_mask()) < (b ^ sign_mask())
}

/// Signed greater-than over two's-complement words.
pub fn sgt(a: Word, b: Word) -> bool {
    (a ^ sign_mask()) > (b ^ sign_mask())
}

fn sign_mask() -> Word {
    Word::one() << 255
}

/// EVM BYTE: the `i`-th byte of `x`, counting from the most significant;
/// zero when `i >= 32`.
pub fn byte(i: Word, x: Word) -> Word {
    if i >= Word::from(32u8) {
        return Word::zero();
    }
    let i = i.as_usize();
    Word::from(x.byte(31 - i))
}

/// Big-endian 32-byte encoding.
pub fn to_be_bytes(x: Word) -> [u8; 32] {
    let mut out = [0u8; 32];
    x.to_big_endian(&mut out);
    out
}

/// Word from a big-endian slice of at most 32 bytes.
pub fn from_be_slice(bytes: &[u8]) -> Word {
    debug_assert!(bytes.len() <= 32);
    Word::from_big_endian(bytes)
}

/// Lowercase hex with `0x` prefix, no leading-zero trimming.
pub fn to_hex(x: Word) -> String {
    let mut s = String::with_capacity(66);
    s.push_str("0x");
    for b in to_be_bytes(x) {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
