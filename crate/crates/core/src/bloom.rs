//! 2048-bit logs bloom in the Ethereum header style.
//!
//! Every item (a log's emitting address or one of its topics) is hashed with
//! Keccak-256 and sets three bits, each taken from the low 11 bits of the
//! byte pairs `(0,1)`, `(2,3)`, `(4,5)` of the digest.
//!
//! Storage layout is 256 bytes where bit `p` lives in byte `p / 8` under the
//! mask `0x80 >> (p % 8)`, i.e. bit 0 is the most significant bit of byte 0.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::l1::Receipt;
use crate::primitives::keccak256;

pub const BLOOM_BITS: usize = 2048;
pub const BLOOM_BYTES: usize = BLOOM_BITS / 8;
/// Bits set per inserted item.
pub const BLOOM_K: usize = 3;

/// The three bit positions an item maps to.
pub fn bloom_bits(item: &[u8]) -> [u16; 3] {
    let d = keccak256(item).0;
    let pos = |i: usize| (((d[2 * i] as u16) << 8) | d[2 * i + 1] as u16) % BLOOM_BITS as u16;
    [pos(0), pos(1), pos(2)]
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LogsBloom(pub [u8; BLOOM_BYTES]);

impl Default for LogsBloom {
    fn default() -> Self {
        Self::EMPTY
    }
}

impl LogsBloom {
    pub const EMPTY: Self = Self([0u8; BLOOM_BYTES]);
    pub const FULL: Self = Self([0xff; BLOOM_BYTES]);

    pub fn is_set(&self, bit: u16) -> bool {
        self.0[bit as usize / 8] & (0x80 >> (bit % 8)) != 0
    }

    pub fn set(&mut self, bit: u16) {
        self.0[bit as usize / 8] |= 0x80 >> (bit % 8);
    }

    pub fn clear(&mut self, bit: u16) {
        self.0[bit as usize / 8] &= !(0x80 >> (bit % 8));
    }

    /// Bloom with the item's bits added.
    #[must_use]
    pub fn insert(mut self, item: &[u8]) -> Self {
        self.accrue(item);
        self
    }

    /// In-place variant of [`LogsBloom::insert`].
    pub fn accrue(&mut self, item: &[u8]) {
        for bit in bloom_bits(item) {
            self.set(bit);
        }
    }

    /// True iff all three bits of `item` are set. Never false for an inserted item.
    pub fn may_contain(&self, item: &[u8]) -> bool {
        bloom_bits(item).iter().all(|&b| self.is_set(b))
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        out.0.iter_mut().zip(other.0.iter()).for_each(|(a, b)| *a |= b);
        out
    }

    /// Every bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }

    pub fn to_bytes(&self) -> [u8; BLOOM_BYTES] {
        self.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Self)
    }
}

impl fmt::Debug for LogsBloom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogsBloom({} bits set)", self.count_ones())
    }
}

impl Serialize for LogsBloom {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("0x{}", hex::encode(self.0)))
    }
}

impl<'de> Deserialize<'de> for LogsBloom {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let raw = hex::decode(s.trim_start_matches("0x")).map_err(serde::de::Error::custom)?;
        Self::from_bytes(&raw).ok_or_else(|| serde::de::Error::custom("logs bloom must be 256 bytes"))
    }
}

/// Union of the address and every topic of every log.
pub fn block_bloom(receipts: &[Receipt]) -> LogsBloom {
    let mut bloom = LogsBloom::EMPTY;
    for log in receipts.iter().flat_map(|r| r.logs.iter()) {
        bloom.accrue(log.address.as_bytes());
        for topic in &log.topics {
            bloom.accrue(topic.as_bytes());
        }
    }
    bloom
}

/// Analytic false-positive probability after `n_items` insertions:
/// `(1 - (1 - 1/m)^(k n))^k` with `m = 2048`, `k = 3`.
pub fn fp_rate_estimate(n_items: u64) -> f64 {
    let m = BLOOM_BITS as f64;
    let k = BLOOM_K as f64;
    let unset = (1.0 - 1.0 / m).powf(k * n_items as f64);
    (1.0 - unset).powf(k)
}
