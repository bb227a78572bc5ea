//! Abstract cost accounting standing in for zkVM cycle counts.
//!
//! A [`CostLedger`] keeps three counters. `total` sees every charge,
//! `derivation` sees L1 traversal and DA extraction work, and `receipt` sees
//! receipt log decoding.

use std::ops::Add;

use serde::{Deserialize, Serialize};

/// Per-primitive weights. All counts are multiplied by the matching weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub w_tx_scan: u64,
    pub w_receipt_log: u64,
    pub w_byte_decode: u64,
    pub w_blob_hash: u64,
    pub w_header: u64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { w_tx_scan: 200, w_receipt_log: 500, w_byte_decode: 1, w_blob_hash: 300, w_header: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    TxScan,
    ReceiptLog(u64),
    ByteDecode(u64),
    BlobHash,
    Header,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub total: u64,
    pub derivation: u64,
    pub receipt: u64,
}

impl CostLedger {
    pub fn charge(&mut self, kind: Charge, weights: &CostWeights) {
        let (amount, is_receipt) = match kind {
            Charge::TxScan => (weights.w_tx_scan, false),
            Charge::ReceiptLog(n) => (weights.w_receipt_log * n, true),
            Charge::ByteDecode(n) => (weights.w_byte_decode * n, false),
            Charge::BlobHash => (weights.w_blob_hash, false),
            Charge::Header => (weights.w_header, false),
        };
        self.total += amount;
        if is_receipt {
            self.receipt += amount;
        } else {
            self.derivation += amount;
        }
    }
}

impl Add for CostLedger {
    type Output = CostLedger;

    fn add(self, rhs: Self) -> Self::Output {
        CostLedger {
            total: self.total + rhs.total,
            derivation: self.derivation + rhs.derivation,
            receipt: self.receipt + rhs.receipt,
        }
    }
}

impl std::iter::Sum for CostLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(CostLedger::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("DivisionByZero: baseline counter is zero")]
    DivisionByZero,
}

impl CostError {
    pub fn code(&self) -> &'static str {
        "DivisionByZero"
    }
}

/// Relative saving of `optimized` against `baseline`, in percent.
pub fn diff_percent(baseline: u64, optimized: u64) -> Result<f64, CostError> {
    if baseline == 0 {
        return Err(CostError::DivisionByZero);
    }
    Ok(100.0 * (baseline as f64 - optimized as f64) / baseline as f64)
}
