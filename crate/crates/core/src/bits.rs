//! Bit strings and the prefix-free codecs used across the lab.
//!
//! A [`BitString`] is the universal currency here: observed prefixes, machine
//! program texts, and serialized descriptors are all bit strings. Bits are
//! packed big-endian within each byte; the final byte is zero-padded.
//!
//! The integer code implemented by [`encode_nat`] is an Elias-delta variant
//! fixed once so that every descriptor size in this crate is bit-exact and
//! reproducible: for `n >= 1` with `N` = bit-count of `n`, emit
//! `floor(log2 N)` zeros, then `N` in binary, then the low `N - 1` bits of
//! `n`. It is prefix-free and satisfies
//! `|encode_nat(n)| <= log2 n + 2 log2 log2 (n + 2) + 2`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A finite string of binary symbols. The empty string is written `λ`.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    /// Packed bits, big-endian within each byte, final byte zero-padded.
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// Builds from packed bytes plus an explicit bit length (cache wire form).
    pub fn from_packed(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Decode(format!(
                "packed length mismatch: {} bytes for {} bits",
                bytes.len(),
                len
            )));
        }
        let mut s = Self { bytes, len };
        s.clear_padding();
        Ok(s)
    }

    pub fn from_bits<I: IntoIterator<Item = u8>>(bits: I) -> Self {
        let mut s = Self::new();
        for b in bits {
            s.push(b != 0);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn push_bit(&mut self, bit: u8) {
        self.push(bit != 0);
    }

    /// Bit at position `i` (0-based), as 0 or 1.
    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.bytes[i / 8] >> (7 - i % 8)) & 1
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push_bit(b);
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    /// Substring `[start, end)`, 0-based.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len);
        let mut out = BitString::with_capacity(end - start);
        for i in start..end {
            out.push_bit(self.get(i));
        }
        out
    }

    pub fn prefix(&self, n: usize) -> BitString {
        self.slice(0, n.min(self.len))
    }

    pub fn starts_with(&self, prefix: &BitString) -> bool {
        prefix.len <= self.len && (0..prefix.len).all(|i| self.get(i) == prefix.get(i))
    }

    /// First `k` symbols of the infinite periodic repetition of `self`.
    /// Panics on an empty period.
    pub fn cycle_to(&self, k: usize) -> BitString {
        assert!(!self.is_empty(), "cannot cycle the empty string");
        let mut out = BitString::with_capacity(k);
        for i in 0..k {
            out.push_bit(self.get(i % self.len));
        }
        out
    }

    pub fn packed_bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn clear_padding(&mut self) {
        if !self.len.is_multiple_of(8) {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - self.len % 8);
            }
        }
    }

    /// Length-lexicographic comparison: shorter first, then bitwise with 0 < 1.
    pub fn lenlex_cmp(&self, other: &BitString) -> Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| self.bytes.cmp(&other.bytes))
    }
}

/// The total order on bit strings is length-lexicographic:
/// `λ < 0 < 1 < 00 < 01 < 10 < 11 < 000 < ...`.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lenlex_cmp(other)
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "λ")
        } else {
            write!(f, "{self}")
        }
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitString::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                'λ' => {} // explicit empty-string spelling
                _ => {
                    return Err(Error::Decode(format!(
                        "invalid bit character {c:?} in {s:?}"
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Sequential reader over a bit string, used by the codec and descriptor
/// parsers.
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<u8> {
        if self.pos >= self.bits.len() {
            return Err(Error::Decode("unexpected end of bit string".into()));
        }
        let b = self.bits.get(self.pos);
        self.pos += 1;
        Ok(b)
    }

    pub fn read_bits(&mut self, n: usize) -> Result<BitString> {
        if self.remaining() < n {
            return Err(Error::Decode("unexpected end of bit string".into()));
        }
        let out = self.bits.slice(self.pos, self.pos + n);
        self.pos += n;
        Ok(out)
    }

    /// Rest of the input from the cursor on.
    pub fn rest(&self) -> BitString {
        self.bits.slice(self.pos, self.bits.len())
    }
}

/// Prefix-free code for positive integers (Elias-delta variant, see module
/// docs). `n = 0` is an invalid argument.
pub fn encode_nat(n: u64) -> Result<BitString> {
    if n == 0 {
        return Err(Error::InvalidArgument("encode_nat requires n >= 1".into()));
    }
    let nbits = 64 - n.leading_zeros() as u64; // N
    let nn = 64 - nbits.leading_zeros() as u64; // bit-count of N
    let mut out = BitString::with_capacity(2 * nn as usize + nbits as usize);
    for _ in 0..nn - 1 {
        out.push(false); // floor(log2 N) zeros
    }
    for i in (0..nn).rev() {
        out.push((nbits >> i) & 1 == 1); // binary(N), MSB first
    }
    for i in (0..nbits - 1).rev() {
        out.push((n >> i) & 1 == 1); // low N-1 bits of n
    }
    Ok(out)
}

/// Inverse of [`encode_nat`] on a reader positioned at a codeword.
pub fn read_nat(r: &mut BitReader<'_>) -> Result<u64> {
    let mut zeros = 0usize;
    loop {
        match r.read_bit() {
            Ok(0) => zeros += 1,
            Ok(_) => break,
            Err(_) => return Err(Error::Decode("truncated integer codeword".into())),
        }
        if zeros > 6 {
            // N would exceed 64 bits; cannot be a valid u64 codeword.
            return Err(Error::Decode("integer codeword out of range".into()));
        }
    }
    let mut nbits: u64 = 1;
    for _ in 0..zeros {
        let b = r
            .read_bit()
            .map_err(|_| Error::Decode("truncated integer codeword".into()))?;
        nbits = (nbits << 1) | b as u64;
    }
    if nbits > 64 {
        return Err(Error::Decode("integer codeword out of range".into()));
    }
    let mut n: u64 = 1;
    for _ in 0..nbits - 1 {
        let b = r
            .read_bit()
            .map_err(|_| Error::Decode("truncated integer codeword".into()))?;
        n = (n << 1) | b as u64;
    }
    Ok(n)
}

/// Decodes a codeword prefix, returning the integer and the unconsumed rest.
pub fn decode_nat(bits: &BitString) -> Result<(u64, BitString)> {
    let mut r = BitReader::new(bits);
    let n = read_nat(&mut r)?;
    Ok((n, r.rest()))
}

/// Length-prefixed string: `encode_nat(|x| + 1) ++ x`. The shift by one keeps
/// λ encodable. Prefix-free over all strings.
pub fn encode_len_str(x: &BitString) -> BitString {
    let mut out = encode_nat(x.len() as u64 + 1).expect("len + 1 >= 1");
    out.extend_from(x);
    out
}

/// Inverse of [`encode_len_str`] on a reader.
pub fn read_len_str(r: &mut BitReader<'_>) -> Result<BitString> {
    let n = read_nat(r)?;
    if n == 0 {
        return Err(Error::Decode("length field must be >= 1".into()));
    }
    r.read_bits((n - 1) as usize)
}

/// Input-tape encoding handed to machine-program predictors:
/// `1 x1 1 x2 ... 1 xn 0`. Each symbol is announced by a 1 and the string is
/// terminated by a single 0, so it is self-delimiting under a one-way read
/// head.
pub fn encode_predictor_input(x: &BitString) -> BitString {
    let mut out = BitString::with_capacity(2 * x.len() + 1);
    for b in x.iter() {
        out.push(true);
        out.push_bit(b);
    }
    out.push(false);
    out
}

/// Upper bound on `|encode_nat(n)|` asserted throughout:
/// `log2 n + 2 log2 log2 (n + 2) + 2`.
pub fn nat_code_length_bound(n: u64) -> f64 {
    let n = n as f64;
    n.log2() + 2.0 * (n + 2.0).log2().log2() + 2.0
}
