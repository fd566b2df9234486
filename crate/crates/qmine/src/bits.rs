//! Fixed-width binary words for addresses, transactions and itemsets.
//!
//! Bit strings are written most-significant-bit first: the first character is
//! item 1 (or address bit 0), and the same character order is used everywhere
//! a `BitString` is printed or parsed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary word of `width` bits stored in the low bits of `value`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct BitString {
    width: u32,
    value: u64,
}

impl BitString {
    pub fn new(width: u32, value: u64) -> Result<Self> {
        if width > 63 {
            return Err(Error::InvalidParams(format!("bit width {width} exceeds 63")));
        }
        if width < 64 && value >> width != 0 {
            return Err(Error::InvalidParams(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        Ok(Self { width, value })
    }

    pub fn zeros(width: u32) -> Self {
        Self { width, value: 0 }
    }

    pub fn ones(width: u32) -> Self {
        Self { width, value: mask(width) }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Bit at position `i` counted from the left (most significant) end.
    pub fn bit(&self, i: u32) -> bool {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        (self.value >> (self.width - 1 - i)) & 1 == 1
    }

    pub fn with_bit(&self, i: u32, on: bool) -> Self {
        assert!(i < self.width);
        let m = 1u64 << (self.width - 1 - i);
        let value = if on { self.value | m } else { self.value & !m };
        Self { width: self.width, value }
    }

    pub fn count_ones(&self) -> u32 {
        self.value.count_ones()
    }

    /// `self ⊆ other` as item sets.
    pub fn is_subset_of(&self, other: &BitString) -> bool {
        self.value & !other.value == 0
    }

    pub fn xor(&self, other: &BitString) -> Self {
        debug_assert_eq!(self.width, other.width);
        Self { width: self.width, value: self.value ^ other.value }
    }

    pub fn and(&self, other: &BitString) -> Self {
        debug_assert_eq!(self.width, other.width);
        Self { width: self.width, value: self.value & other.value }
    }

    pub fn or(&self, other: &BitString) -> Self {
        debug_assert_eq!(self.width, other.width);
        Self { width: self.width, value: self.value | other.value }
    }

    /// Append one bit on the right: `μ·a`.
    pub fn push(&self, bit: bool) -> Self {
        Self { width: self.width + 1, value: (self.value << 1) | bit as u64 }
    }

    /// All words of the given width in increasing order.
    pub fn all(width: u32) -> impl Iterator<Item = BitString> {
        (0..1u64 << width).map(move |value| BitString { width, value })
    }
}

pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.len() > 63 {
            return Err(Error::Parse(format!("bad bit string length: {s:?}")));
        }
        let mut value = 0u64;
        for ch in s.chars() {
            value = match ch {
                '0' => value << 1,
                '1' => (value << 1) | 1,
                _ => return Err(Error::Parse(format!("not a 0/1 string: {s:?}"))),
            };
        }
        Ok(Self { width: s.len() as u32, value })
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.value(), 6);
        assert_eq!(b.to_string(), "0110");
        assert!(!b.bit(0));
        assert!(b.bit(1));
    }

    #[test]
    fn subset_follows_item_semantics() {
        let a: BitString = "01".parse().unwrap();
        let b: BitString = "11".parse().unwrap();
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(BitString::zeros(2).is_subset_of(&a));
    }

    #[test]
    fn push_appends_on_the_right() {
        let a: BitString = "10".parse().unwrap();
        assert_eq!(a.push(true).to_string(), "101");
    }

    #[test]
    fn rejects_garbage() {
        assert!("01x".parse::<BitString>().is_err());
        assert!(BitString::new(2, 4).is_err());
    }
}
