//! Pieces shared by both derivation pipelines: the metered L1 reader, DA
//! elements, channel assembly, and the canonical derivation output.

pub mod channel;
pub mod frame;
mod reader;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::CostLedger;
use crate::l1::{L1Error, SystemConfig};
use crate::primitives::{hex_bytes_vec, keccak256, Address, B256};

pub use channel::{assemble_channels, Channel, ChannelBank};
pub use frame::{Frame, FrameError};
pub use reader::L1Reader;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DaKind {
    Calldata,
    Blob,
}

/// DA bytes from one batcher transaction (or one of its blobs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaElement {
    pub kind: DaKind,
    pub bytes: Vec<u8>,
    pub source_block: u64,
    pub source_tx_index: usize,
    /// Position among all blob hashes of the source block.
    pub blob_index: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    pub l1_origin_number: u64,
    #[serde(with = "hex_bytes_vec")]
    pub deposits: Vec<Vec<u8>>,
    #[serde(with = "hex_bytes_vec")]
    pub batch_txs: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationOutput {
    pub epochs: Vec<Epoch>,
    pub final_sys: SystemConfig,
    /// Not part of the canonical form; pipelines are expected to differ here.
    #[serde(skip)]
    pub ledger: CostLedger,
}

impl DerivationOutput {
    /// Sorted-key JSON of epochs and final system config.
    pub fn canonical_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("output serializes"))
    }

    /// Stand-in for the L2 output root.
    pub fn output_root(&self) -> B256 {
        keccak256(self.canonical_json())
    }

    pub fn batch_count(&self) -> usize {
        self.epochs.iter().map(|e| e.batch_txs.len()).sum()
    }
}

/// Serializes a JSON value with object keys sorted at every level.
pub fn canonical_json(value: &serde_json::Value) -> String {
    fn sorted(value: &serde_json::Value) -> serde_json::Value {
        match value {
            serde_json::Value::Object(map) => {
                let ordered: BTreeMap<&String, serde_json::Value> = map.iter().map(|(k, v)| (k, sorted(v))).collect();
                serde_json::Value::Object(ordered.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            serde_json::Value::Array(items) => serde_json::Value::Array(items.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(value)).expect("json value serializes")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeriveError {
    #[error(transparent)]
    L1(#[from] L1Error),
    #[error("InvalidRange: [{start}, {end}]")]
    InvalidRange { start: u64, end: u64 },
    #[error("MissingBlob: {hash} referenced in block {block}")]
    MissingBlob { block: u64, hash: B256 },
    #[error("MalformedFrame: block {block}: {reason}")]
    MalformedFrame { block: u64, reason: FrameError },
    #[error("NonceGapError: expected nonce {expected}, observed {observed}")]
    NonceGap { expected: u64, observed: u64 },
    #[error("NonceMismatchError: expected nonce {expected}, observed {observed}")]
    NonceMismatch { expected: u64, observed: u64 },
    #[error("SenderMismatchError: expected {expected}, observed {observed} (authenticated: {authenticated})")]
    SenderMismatch { expected: Address, observed: Address, authenticated: bool },
    #[error("NonceRebaseError: first nonce {observed} is above agreed nonce {agreed}")]
    NonceRebase { agreed: u64, observed: u64 },
    #[error("BoundaryMismatchError: tracked ({tracked_sender}, {tracked_nonce}) vs claimed ({claimed_sender}, {claimed_nonce})")]
    BoundaryMismatch { tracked_sender: Address, tracked_nonce: u64, claimed_sender: Address, claimed_nonce: u64 },
    #[error("L1HeadMismatch: block {block} hash {found} differs from trusted head {expected}")]
    L1HeadMismatch { block: u64, expected: B256, found: B256 },
}

impl DeriveError {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            DeriveError::L1(e) => e.code(),
            DeriveError::InvalidRange { .. } => "InvalidRange",
            DeriveError::MissingBlob { .. } => "MissingBlob",
            DeriveError::MalformedFrame { .. } => "MalformedFrame",
            DeriveError::NonceGap { .. } => "NonceGapError",
            DeriveError::NonceMismatch { .. } => "NonceMismatchError",
            DeriveError::SenderMismatch { .. } => "SenderMismatchError",
            DeriveError::NonceRebase { .. } => "NonceRebaseError",
            DeriveError::BoundaryMismatch { .. } => "BoundaryMismatchError",
            DeriveError::L1HeadMismatch { .. } => "L1HeadMismatch",
        }
    }

    /// Errors raised by the sender/nonce discipline.
    pub fn is_nonce_or_sender(&self) -> bool {
        matches!(
            self,
            DeriveError::NonceGap { .. }
                | DeriveError::NonceMismatch { .. }
                | DeriveError::SenderMismatch { .. }
                | DeriveError::NonceRebase { .. }
                | DeriveError::BoundaryMismatch { .. }
        )
    }
}

/// Range bounds must be inside the chain and exclude genesis.
pub(crate) fn check_range(chain: &crate::l1::Chain, start: u64, end: u64) -> Result<(), DeriveError> {
    if start == 0 || start > end {
        return Err(DeriveError::InvalidRange { start, end });
    }
    if end >= chain.len() {
        return Err(L1Error::OutOfRange(end).into());
    }
    Ok(())
}
