//! Range records, aggregation, and the on-chain output anchor.
//!
//! Proof verification is modelled structurally: a range record is trusted
//! once its program run succeeded, and an aggregate is trusted once every
//! adjacent pair of records lines up.

use serde::{Deserialize, Serialize};

use crate::l1::{Chain, L1Error};
use crate::optimized::{get_batcher_sender_info_at, BootInfo, PipelineMode};
use crate::primitives::{Address, B256};
use crate::program::RangeOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeRecord {
    pub pre_sender: Address,
    pub pre_nonce: u64,
    pub post_sender: Address,
    pub post_nonce: u64,
    pub start_l1_head: u64,
    pub end_l1_head: u64,
    pub output_root: B256,
    pub mode: PipelineMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMeta {
    pub batcher: Address,
    pub nonce: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub pre_sender: Address,
    pub pre_nonce: u64,
    pub post_sender: Address,
    pub post_nonce: u64,
    pub start_l1_head: u64,
    pub end_l1_head: u64,
    pub output_root: B256,
    pub range_count: usize,
}

/// Anchor state of the output oracle contract. Roots are append-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleState {
    pub meta: OutputMeta,
    roots: Vec<B256>,
}

impl OracleState {
    pub fn genesis(meta: OutputMeta) -> Self {
        Self { meta, roots: Vec::new() }
    }

    /// Seeds the anchor from chain state at `l1_head`.
    pub fn deployed_at(chain: &Chain, l1_head: u64) -> Result<Self, L1Error> {
        let (batcher, nonce) = get_batcher_sender_info_at(chain, l1_head)?;
        Ok(Self::genesis(OutputMeta { batcher, nonce }))
    }

    pub fn roots(&self) -> &[B256] {
        &self.roots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryField {
    Sender,
    Nonce,
    L1Head,
}

impl std::fmt::Display for BoundaryField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryField::Sender => "sender",
            BoundaryField::Nonce => "nonce",
            BoundaryField::L1Head => "l1_head",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProofError {
    #[error("EmptyAggregate: no range records")]
    EmptyAggregate,
    #[error("ContinuityError: boundary {boundary} ({field}) between ranges {boundary} and {}", boundary + 1)]
    Continuity { boundary: usize, field: BoundaryField },
    #[error("AnchorMismatchError: anchor ({}, {}), proposal starts at ({}, {})", expected.batcher, expected.nonce, found.batcher, found.nonce)]
    AnchorMismatch { expected: OutputMeta, found: OutputMeta },
    #[error(transparent)]
    L1(#[from] L1Error),
}

impl ProofError {
    pub fn code(&self) -> &'static str {
        match self {
            ProofError::EmptyAggregate => "EmptyAggregate",
            ProofError::Continuity { .. } => "ContinuityError",
            ProofError::AnchorMismatch { .. } => "AnchorMismatchError",
            ProofError::L1(e) => e.code(),
        }
    }
}

/// Optimized ranges commit to the boot's agreed pair and the tracked
/// post-state. Baseline ranges read both pairs from the chain.
pub fn make_range_record(chain: &Chain, boot: &BootInfo, outcome: &RangeOutcome) -> Result<RangeRecord, ProofError> {
    let ((pre_sender, pre_nonce), (post_sender, post_nonce)) = match (outcome.mode, outcome.post) {
        (PipelineMode::Optimized, Some(post)) => {
            ((boot.agreed_sender, boot.agreed_nonce), (post.sender, post.expected_next_nonce))
        }
        _ => (get_batcher_sender_info_at(chain, boot.l1_start - 1)?, get_batcher_sender_info_at(chain, boot.l1_end)?),
    };
    Ok(RangeRecord {
        pre_sender,
        pre_nonce,
        post_sender,
        post_nonce,
        start_l1_head: boot.l1_start - 1,
        end_l1_head: boot.l1_end,
        output_root: outcome.output.output_root(),
        mode: outcome.mode,
    })
}

/// Checks that each record picks up exactly where the previous one ended.
pub fn aggregate(records: &[RangeRecord]) -> Result<AggregateSummary, ProofError> {
    let (first, last) = match records {
        [] => return Err(ProofError::EmptyAggregate),
        [first, .., last] => (first, last),
        [only] => (only, only),
    };
    for (boundary, pair) in records.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let field = if a.post_sender != b.pre_sender {
            Some(BoundaryField::Sender)
        } else if a.post_nonce != b.pre_nonce {
            Some(BoundaryField::Nonce)
        } else if a.end_l1_head != b.start_l1_head {
            Some(BoundaryField::L1Head)
        } else {
            None
        };
        if let Some(field) = field {
            return Err(ProofError::Continuity { boundary, field });
        }
    }
    Ok(AggregateSummary {
        pre_sender: first.pre_sender,
        pre_nonce: first.pre_nonce,
        post_sender: last.post_sender,
        post_nonce: last.post_nonce,
        start_l1_head: first.start_l1_head,
        end_l1_head: last.end_l1_head,
        output_root: last.output_root,
        range_count: records.len(),
    })
}

pub fn propose_output_root(state: &OracleState, summary: &AggregateSummary) -> Result<OracleState, ProofError> {
    let found = OutputMeta { batcher: summary.pre_sender, nonce: summary.pre_nonce };
    if found != state.meta {
        return Err(ProofError::AnchorMismatch { expected: state.meta, found });
    }
    let mut roots = state.roots.clone();
    roots.push(summary.output_root);
    Ok(OracleState { meta: OutputMeta { batcher: summary.post_sender, nonce: summary.post_nonce }, roots })
}
