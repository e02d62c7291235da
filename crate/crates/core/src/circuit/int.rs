//! Fixed-width encrypted integers and the circuits built on them.
//!
//! Gate cost per call, with `l` the operand width:
//!
//! | circuit               | XOR        | AND       | NOT | MUX  |
//! |-----------------------|------------|-----------|-----|------|
//! | `add`                 | 4l         | l         | 0   | 0    |
//! | `negate`              | 4l         | l         | l   | 0    |
//! | `less_than`           | 4l         | l         | l   | 0    |
//! | `equals`              | l          | l - 1     | l   | 0    |
//! | `saturating_popcount` | 2·b·N      | b·N       | 0   | 0    |
//! | `oblivious_swap`      | 0          | 0         | 0   | 2L   |
//!
//! where `N` is the number of input bits, `b` the register width and `L`
//! the payload length. Each full-adder stage computes
//! `t = x ^ c`, `u = y ^ c`, `s = t ^ y`, `c' = (t & u) ^ c`: four XORs and
//! one AND, carry-in fixed to an encrypted constant.

use serde::{Deserialize, Serialize};

use super::backend::{BitBackend, BitDecrypt};
use crate::error::{Error, Result};

/// Bitwise-encrypted unsigned integer, least-significant bit first.
/// Arithmetic wraps modulo `2^width`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncInt<T> {
    bits: Vec<T>,
}

impl<T: Clone> EncInt<T> {
    pub fn from_bits(bits: Vec<T>) -> Self {
        Self { bits }
    }

    pub fn encrypt<B: BitBackend<Bit = T>>(be: &B, value: u128, width: usize) -> Self {
        Self::from_bits(
            (0..width)
                .map(|i| be.encrypt_bit(bit_of(value, i)))
                .collect(),
        )
    }

    pub fn constant<B: BitBackend<Bit = T>>(be: &B, value: u128, width: usize) -> Self {
        Self::from_bits((0..width).map(|i| be.constant(bit_of(value, i))).collect())
    }

    pub fn decrypt<B: BitDecrypt<Bit = T>>(&self, be: &B) -> u128 {
        decrypt_bits(be, &self.bits)
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[T] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<T> {
        self.bits
    }

    pub fn msb(&self) -> &T {
        self.bits.last().expect("zero-width integer")
    }

    /// Low `width` bits.
    pub fn truncated(&self, width: usize) -> Self {
        Self::from_bits(self.bits[..width.min(self.bits.len())].to_vec())
    }

    /// Zero-extends with encrypted constants up to `width`.
    pub fn extended<B: BitBackend<Bit = T>>(&self, be: &B, width: usize) -> Self {
        let mut bits = self.bits.clone();
        while bits.len() < width {
            bits.push(be.constant(false));
        }
        Self::from_bits(bits)
    }
}

pub(crate) fn bit_of(value: u128, i: usize) -> bool {
    i < 128 && (value >> i) & 1 == 1
}

/// Little-endian decryption of a bit vector.
pub fn decrypt_bits<B: BitDecrypt>(be: &B, bits: &[B::Bit]) -> u128 {
    bits.iter().enumerate().fold(0u128, |acc, (i, b)| {
        acc | ((be.decrypt_bit(b) as u128) << i)
    })
}

fn same_width<T>(x: &EncInt<T>, y: &EncInt<T>) -> Result<()> {
    if x.bits.len() != y.bits.len() {
        return Err(Error::WidthMismatch {
            left: x.bits.len(),
            right: y.bits.len(),
        });
    }
    Ok(())
}

fn ripple_add<B: BitBackend>(be: &B, x: &[B::Bit], y: &[B::Bit], carry_in: bool) -> Vec<B::Bit> {
    let mut c = be.constant(carry_in);
    x.iter()
        .zip(y)
        .map(|(xi, yi)| {
            let t = be.xor(xi, &c);
            let u = be.xor(yi, &c);
            let s = be.xor(&t, yi);
            c = be.xor(&be.and(&t, &u), &c);
            s
        })
        .collect()
}

/// `(x + y) mod 2^l` with a ripple-carry adder.
pub fn add<B: BitBackend>(
    be: &B,
    x: &EncInt<B::Bit>,
    y: &EncInt<B::Bit>,
) -> Result<EncInt<B::Bit>> {
    same_width(x, y)?;
    Ok(EncInt::from_bits(ripple_add(be, &x.bits, &y.bits, false)))
}

fn complement<B: BitBackend>(be: &B, y: &EncInt<B::Bit>) -> Vec<B::Bit> {
    y.bits.iter().map(|b| be.not(b)).collect()
}

/// Two's-complement negation `(2^l - y) mod 2^l`: complement, then add one
/// through the carry-in.
pub fn negate<B: BitBackend>(be: &B, y: &EncInt<B::Bit>) -> EncInt<B::Bit> {
    let zero: Vec<B::Bit> = (0..y.width()).map(|_| be.constant(false)).collect();
    EncInt::from_bits(ripple_add(be, &complement(be, y), &zero, true))
}

/// `x - y` as `x + (-y)`, computed in one adder pass.
pub fn sub<B: BitBackend>(
    be: &B,
    x: &EncInt<B::Bit>,
    y: &EncInt<B::Bit>,
) -> Result<EncInt<B::Bit>> {
    same_width(x, y)?;
    Ok(EncInt::from_bits(ripple_add(
        be,
        &x.bits,
        &complement(be, y),
        true,
    )))
}

/// Encrypted `x < y`, read off the most significant bit of `x - y`.
///
/// Both operands must be below `2^(l-1)`; the top bit is the sign of the
/// difference and must be zero in the inputs.
pub fn less_than<B: BitBackend>(be: &B, x: &EncInt<B::Bit>, y: &EncInt<B::Bit>) -> Result<B::Bit> {
    if x.width() == 0 {
        return Err(Error::Argument("comparison needs width >= 1".into()));
    }
    Ok(sub(be, x, y)?.msb().clone())
}

/// Encrypted `x == y` as the AND of bitwise XNORs.
pub fn equals<B: BitBackend>(be: &B, x: &EncInt<B::Bit>, y: &EncInt<B::Bit>) -> Result<B::Bit> {
    same_width(x, y)?;
    let mut xnors = x
        .bits
        .iter()
        .zip(&y.bits)
        .map(|(a, b)| be.not(&be.xor(a, b)));
    let Some(first) = xnors.next() else {
        return Ok(be.constant(true));
    };
    Ok(xnors.fold(first, |acc, e| be.and(&acc, &e)))
}

/// Number of ones in `bits`, saturating at `2^b_max - 1`, in a `b_max`-bit
/// register.
///
/// Each input bit is added with a half-adder chain. A carry out of the top
/// stage only happens when the register was full and the input was one, in
/// which case every sum bit is zero, so XOR-ing the carry back into each bit
/// restores all ones.
pub fn saturating_popcount<B: BitBackend>(
    be: &B,
    bits: &[B::Bit],
    b_max: usize,
) -> Result<EncInt<B::Bit>> {
    if b_max == 0 {
        return Err(Error::Argument("b_max must be at least 1".into()));
    }
    let mut reg: Vec<B::Bit> = (0..b_max).map(|_| be.constant(false)).collect();
    for bit in bits {
        let mut carry = bit.clone();
        for r in reg.iter_mut() {
            let s = be.xor(r, &carry);
            carry = be.and(r, &carry);
            *r = s;
        }
        for r in reg.iter_mut() {
            *r = be.xor(r, &carry);
        }
    }
    Ok(EncInt::from_bits(reg))
}

/// Conditional swap of two equally shaped payloads. Returns `(b, a)` when `c`
/// decrypts to one, `(a, b)` otherwise. Every bit of both payloads goes
/// through a MUX either way.
pub fn oblivious_swap<B: BitBackend>(
    be: &B,
    c: &B::Bit,
    a: &[B::Bit],
    b: &[B::Bit],
) -> Result<(Vec<B::Bit>, Vec<B::Bit>)> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "swap payloads of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (be.mux(c, y, x), be.mux(c, x, y)))
        .unzip())
}

/// [`oblivious_swap`] on integers.
pub fn oblivious_swap_int<B: BitBackend>(
    be: &B,
    c: &B::Bit,
    a: &EncInt<B::Bit>,
    b: &EncInt<B::Bit>,
) -> Result<(EncInt<B::Bit>, EncInt<B::Bit>)> {
    same_width(a, b)?;
    let (x, y) = oblivious_swap(be, c, &a.bits, &b.bits)?;
    Ok((EncInt::from_bits(x), EncInt::from_bits(y)))
}
