//! Bit strings and incremental linear algebra over GF(2).
//!
//! A [`BitString`] packs up to 64 coordinates into one word. Coordinate 0 is
//! the leftmost character of the textual form and is stored as the most
//! significant of the `len` low bits, so the packed word read as an integer is
//! the big-endian value of the string. This makes lexicographic order equal
//! to integer order and lets `u ‖ w` be computed with one shift.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_BITS: usize = 64;

/// Fixed-width binary string of 0..=64 bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: u8,
    value: u64,
}

#[inline]
fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl BitString {
    /// The empty string, used as the node id when the function is not split.
    pub const EMPTY: BitString = BitString { len: 0, value: 0 };

    /// Builds a string of `len` bits from its big-endian integer value.
    pub fn new(len: usize, value: u64) -> Result<Self> {
        if len > MAX_BITS {
            return Err(Error::invalid(format!(
                "bit string length {len} exceeds {MAX_BITS}"
            )));
        }
        if value & !mask(len) != 0 {
            return Err(Error::invalid(format!(
                "value {value:#x} does not fit in {len} bits"
            )));
        }
        Ok(Self::from_value(len, value))
    }

    /// Like [`BitString::new`] but truncates `value` to `len` bits.
    #[inline]
    pub(crate) fn from_value(len: usize, value: u64) -> Self {
        debug_assert!(len <= MAX_BITS);
        BitString {
            len: len as u8,
            value: value & mask(len),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_value(len, 0)
    }

    pub fn ones(len: usize) -> Self {
        Self::from_value(len, u64::MAX)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Big-endian integer value; also the truth-table index when used as `x`.
    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// Coordinate `i`, counted from the left.
    pub fn bit(&self, i: usize) -> bool {
        assert!(
            i < self.len(),
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.value >> (self.len() - 1 - i)) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.value.count_ones()
    }

    fn check_len(&self, other: &BitString, op: &str) -> Result<()> {
        if self.len != other.len {
            return Err(Error::invalid(format!(
                "{op}: length mismatch ({} vs {})",
                self.len, other.len
            )));
        }
        Ok(())
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitString) -> Result<bool> {
        self.check_len(other, "dot")?;
        Ok(self.dot_unchecked(other))
    }

    #[inline]
    pub(crate) fn dot_unchecked(&self, other: &BitString) -> bool {
        (self.value & other.value).count_ones() & 1 == 1
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other, "xor")?;
        Ok(self.xor_unchecked(other))
    }

    #[inline]
    pub(crate) fn xor_unchecked(&self, other: &BitString) -> BitString {
        BitString {
            len: self.len,
            value: self.value ^ other.value,
        }
    }

    /// `self ‖ tail`.
    pub fn concat(&self, tail: &BitString) -> Result<BitString> {
        let len = self.len() + tail.len();
        if len > MAX_BITS {
            return Err(Error::invalid(format!(
                "concatenation of {} and {} bits exceeds {MAX_BITS}",
                self.len, tail.len
            )));
        }
        let head = if tail.len() == 64 {
            0
        } else {
            self.value << tail.len()
        };
        Ok(BitString::from_value(len, head | tail.value))
    }

    /// Splits into the first `at` coordinates and the rest.
    pub fn split_at(&self, at: usize) -> Result<(BitString, BitString)> {
        if at > self.len() {
            return Err(Error::invalid(format!(
                "split point {at} beyond length {}",
                self.len
            )));
        }
        let tail_len = self.len() - at;
        let head = if tail_len == 64 {
            0
        } else {
            self.value >> tail_len
        };
        Ok((
            BitString::from_value(at, head),
            BitString::from_value(tail_len, self.value),
        ))
    }

    /// All strings of the given length in increasing order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "cannot enumerate {len}-bit strings");
        (0..1u64 << len).map(move |v| BitString::from_value(len, v))
    }
}

impl Ord for BitString {
    /// Lexicographic order; a proper prefix sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        let common = self.len.min(other.len) as usize;
        let a = self
            .value
            .checked_shr((self.len() - common) as u32)
            .unwrap_or(0);
        let b = other
            .value
            .checked_shr((other.len() - common) as u32)
            .unwrap_or(0);
        a.cmp(&b).then(self.len.cmp(&other.len))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > MAX_BITS {
            return Err(Error::invalid(format!(
                "bit string of {} characters exceeds {MAX_BITS}",
                s.len()
            )));
        }
        let mut value = 0u64;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    other => {
                        return Err(Error::invalid(format!("invalid bit character {other:?}")))
                    }
                };
        }
        Ok(BitString::from_value(s.len(), value))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bit string of arbitrary length, used for sorted concatenations that do not
/// fit one word. Packed left-aligned so that word-wise comparison is
/// lexicographic for equal lengths.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LongBits {
    words: Vec<u64>,
    len: usize,
}

impl LongBits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (63 - i % 64)) & 1 == 1
    }

    pub fn push(&mut self, bits: &BitString) {
        for i in 0..bits.len() {
            self.push_bit(bits.bit(i));
        }
    }

    fn push_bit(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            let last = self.words.len() - 1;
            self.words[last] |= 1 << (63 - self.len % 64);
        }
        self.len += 1;
    }

    /// Single-word form when it fits.
    pub fn to_bitstring(&self) -> Option<BitString> {
        if self.len > MAX_BITS {
            return None;
        }
        let value = self.words.first().map_or(0, |w| {
            if self.len == 0 {
                0
            } else {
                w >> (64 - self.len)
            }
        });
        Some(BitString::from_value(self.len, value))
    }
}

impl<'a> FromIterator<&'a BitString> for LongBits {
    fn from_iter<I: IntoIterator<Item = &'a BitString>>(iter: I) -> Self {
        let mut out = LongBits::new();
        for b in iter {
            out.push(b);
        }
        out
    }
}

impl fmt::Display for LongBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for LongBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LongBits(\"{self}\")")
    }
}

/// Linearly independent rows kept in reduced row-echelon form.
///
/// Rows are ordered by leading coordinate, left to right, and every pivot
/// column is zero in all other rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2Basis {
    n: usize,
    rows: Vec<BitString>,
}

impl Gf2Basis {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_BITS {
            return Err(Error::invalid(format!("dimension {n} exceeds {MAX_BITS}")));
        }
        Ok(Gf2Basis {
            n,
            rows: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[BitString] {
        &self.rows
    }

    /// Pivot of a row: the leftmost set coordinate.
    fn pivot(&self, row: &BitString) -> usize {
        debug_assert!(!row.is_zero());
        self.n - 1 - (63 - row.value().leading_zeros() as usize)
    }

    fn reduce(&self, y: BitString) -> BitString {
        self.rows.iter().fold(y, |acc, r| {
            if acc.bit(self.pivot(r)) {
                acc.xor_unchecked(r)
            } else {
                acc
            }
        })
    }

    pub fn contains(&self, y: &BitString) -> Result<bool> {
        self.check(y)?;
        Ok(self.reduce(*y).is_zero())
    }

    fn check(&self, y: &BitString) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::invalid(format!(
                "vector of length {} inserted into basis of dimension {}",
                y.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Adds `y` if it is independent of the current rows. Returns whether the
    /// rank grew.
    pub fn insert(&mut self, y: BitString) -> Result<bool> {
        self.check(&y)?;
        let r = self.reduce(y);
        if r.is_zero() {
            return Ok(false);
        }
        let p = self.pivot(&r);
        for row in self.rows.iter_mut() {
            if row.bit(p) {
                *row = row.xor_unchecked(&r);
            }
        }
        let at = self
            .rows
            .iter()
            .position(|row| {
                let q = self.n - 1 - (63 - row.value().leading_zeros() as usize);
                q > p
            })
            .unwrap_or(self.rows.len());
        self.rows.insert(at, r);
        Ok(true)
    }

    /// Basis of `{v : r · v = 0 for every row r}`, of size `n − rank`.
    pub fn null_space(&self) -> Vec<BitString> {
        let pivots: Vec<usize> = self.rows.iter().map(|r| self.pivot(r)).collect();
        (0..self.n)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                // set the free coordinate, then each pivot coordinate equals
                // that row's entry in the free column
                let mut v = 1u64 << (self.n - 1 - free);
                for (row, &p) in self.rows.iter().zip(&pivots) {
                    if row.bit(free) {
                        v |= 1u64 << (self.n - 1 - p);
                    }
                }
                BitString::from_value(self.n, v)
            })
            .collect()
    }
}
