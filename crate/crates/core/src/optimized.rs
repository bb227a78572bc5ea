//! The prefeed + nonce pipeline.
//!
//! The host hands the program a list of blocks that carry batcher data. The
//! program only scans those blocks' transactions, and makes up for trusting
//! the host by tracking the batcher's account nonce: every batcher
//! transaction in the range must be seen exactly once and in order, so a
//! skipped, replayed or reordered block shows up as a nonce discontinuity.
//! Config updates and deposits are found through the header blooms, which
//! have no false negatives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::{extract_deposits, group_epochs, scan_block_txs, system_config_at, update_system_config};
use crate::derive::{check_range, ChannelBank, DeriveError, DerivationOutput, L1Reader};
use crate::l1::{
    Chain, L1Block, L1Error, ScenarioConfig, SystemConfig, Tx, CONFIG_UPDATE_TOPIC, DEPOSIT_TOPIC, OPTIMISM_PORTAL,
    SYSTEM_CONFIG,
};
use crate::primitives::{Address, B256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonceState {
    pub sender: Address,
    pub expected_next_nonce: u64,
}

/// Host-supplied DA block hints, in the order the host feeds them.
///
/// An honest host sends each DA block once, ascending. The program does not
/// sort or deduplicate: a replayed or swapped hint must reach the nonce check.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefeedSet {
    pub da_blocks: Vec<u64>,
}

/// Trusted inputs of one range program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootInfo {
    pub agreed_sender: Address,
    pub agreed_nonce: u64,
    pub claimed_sender: Address,
    pub claimed_nonce: u64,
    pub l1_start: u64,
    pub l1_end: u64,
    /// Hash of block `l1_end`; every header the program reads must link to it.
    pub l1_head: B256,
}

impl BootInfo {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Boundaries read from `chain` at the range's start and end heads.
    pub fn honest(chain: &Chain, l1_start: u64, l1_end: u64) -> Result<Self, DeriveError> {
        check_range(chain, l1_start, l1_end)?;
        let (agreed_sender, agreed_nonce) = get_batcher_sender_info_at(chain, l1_start - 1)?;
        let (claimed_sender, claimed_nonce) = get_batcher_sender_info_at(chain, l1_end)?;
        Ok(Self {
            agreed_sender,
            agreed_nonce,
            claimed_sender,
            claimed_nonce,
            l1_start,
            l1_end,
            l1_head: chain.block_by_number(l1_end)?.hash,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    Optimized,
    Baseline,
}

impl std::fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PipelineMode::Optimized => "optimized",
            PipelineMode::Baseline => "baseline",
        })
    }
}

/// Batcher in force after block `l1_head` and its account nonce, i.e. the
/// number of authenticated transactions it sent up to and including that
/// block. Host-side and unmetered.
pub fn get_batcher_sender_info_at(chain: &Chain, l1_head: u64) -> Result<(Address, u64), L1Error> {
    let sys = system_config_at(chain, l1_head)?;
    let batcher = sys.batcher_address;
    let nonce = chain.blocks[..=l1_head as usize]
        .iter()
        .flat_map(|b| &b.txs)
        .filter(|t| t.claimed_sender == batcher && chain.verify_tx(t))
        .count() as u64;
    Ok((batcher, nonce))
}

/// Host-side scan for blocks holding at least one authenticated transaction
/// from the batcher in force at that block.
///
/// Any batcher transaction counts, not only well-routed ones, because the
/// nonce tracks the account and the program must see every nonce.
pub fn compute_prefeed_set(chain: &Chain, l1_start: u64, l1_end: u64) -> Result<PrefeedSet, DeriveError> {
    check_range(chain, l1_start, l1_end)?;
    let mut sys = system_config_at(chain, l1_start - 1)?;
    let mut da_blocks = Vec::new();
    for block in &chain.blocks[l1_start as usize..=l1_end as usize] {
        sys = update_system_config(sys, &block.receipts).0;
        if block.txs.iter().any(|t| t.claimed_sender == sys.batcher_address && chain.verify_tx(t)) {
            da_blocks.push(block.number);
        }
    }
    Ok(PrefeedSet { da_blocks })
}

fn config_gate(block: &L1Block) -> bool {
    block.logs_bloom.may_contain(SYSTEM_CONFIG.as_bytes()) && block.logs_bloom.may_contain(CONFIG_UPDATE_TOPIC.as_bytes())
}

fn deposit_gate(block: &L1Block) -> bool {
    block.logs_bloom.may_contain(OPTIMISM_PORTAL.as_bytes()) && block.logs_bloom.may_contain(DEPOSIT_TOPIC.as_bytes())
}

/// Applies config updates from `block` if its bloom says there may be any.
fn gated_config_update(
    reader: &mut L1Reader<'_>,
    block: &L1Block,
    sys: SystemConfig,
) -> Result<(SystemConfig, bool), DeriveError> {
    if !config_gate(block) {
        return Ok((sys, false));
    }
    Ok(update_system_config(sys, reader.receipts(block.number)?))
}

/// Walks `[origin, head]` and reports whether an authentic update moves the
/// batcher away from `sys`. Receipts are fetched only on bloom hits. Stops at
/// the first change.
pub fn has_batcher_sender_change(
    reader: &mut L1Reader<'_>,
    origin: u64,
    head: u64,
    sys: SystemConfig,
) -> Result<bool, DeriveError> {
    let mut sys = sys;
    let mut parent: Option<B256> = None;
    for n in origin..=head {
        let block = reader.header(n)?;
        if parent.is_some_and(|p| p != block.parent_hash) {
            return Err(L1Error::ReorgDetected(n).into());
        }
        parent = Some(block.hash);
        let (next, changed) = gated_config_update(reader, block, sys)?;
        if changed {
            return Ok(true);
        }
        sys = next;
    }
    Ok(false)
}

/// Baseline iff the batcher changes anywhere in the inclusive range.
pub fn wire_pipeline(reader: &mut L1Reader<'_>, boot: &BootInfo) -> Result<PipelineMode, DeriveError> {
    check_range(reader.chain(), boot.l1_start, boot.l1_end)?;
    let start = SystemConfig { batcher_address: boot.agreed_sender };
    if has_batcher_sender_change(reader, boot.l1_start, boot.l1_end, start)? {
        Ok(PipelineMode::Baseline)
    } else {
        Ok(PipelineMode::Optimized)
    }
}

/// First batcher transaction of the range. Its nonce may repeat an already
/// agreed nonce but may not skip ahead of it.
pub fn nonce_init(agreed_sender: Address, agreed_nonce: u64, first_tx: &Tx) -> Result<NonceState, DeriveError> {
    if first_tx.claimed_sender != agreed_sender {
        return Err(DeriveError::SenderMismatch {
            expected: agreed_sender,
            observed: first_tx.claimed_sender,
            authenticated: true,
        });
    }
    if first_tx.nonce > agreed_nonce {
        return Err(DeriveError::NonceRebase { agreed: agreed_nonce, observed: first_tx.nonce });
    }
    Ok(NonceState { sender: agreed_sender, expected_next_nonce: first_tx.nonce + 1 })
}

pub fn nonce_observe(state: NonceState, tx: &Tx) -> Result<NonceState, DeriveError> {
    if tx.claimed_sender != state.sender {
        return Err(DeriveError::SenderMismatch { expected: state.sender, observed: tx.claimed_sender, authenticated: true });
    }
    let expected = state.expected_next_nonce;
    match tx.nonce.cmp(&expected) {
        std::cmp::Ordering::Greater => Err(DeriveError::NonceGap { expected, observed: tx.nonce }),
        std::cmp::Ordering::Less => Err(DeriveError::NonceMismatch { expected, observed: tx.nonce }),
        std::cmp::Ordering::Equal => Ok(NonceState { sender: state.sender, expected_next_nonce: expected + 1 }),
    }
}

/// Optimized derivation of the boot range on a fresh reader.
pub fn derive_range_optimized(
    chain: &Chain,
    boot: &BootInfo,
    prefeed: &PrefeedSet,
    cfg: &ScenarioConfig,
    weights: crate::cost::CostWeights,
) -> Result<(DerivationOutput, NonceState), DeriveError> {
    let mut reader = L1Reader::new(chain, weights);
    derive_range_optimized_with(&mut reader, boot, prefeed, cfg.channel_timeout_blocks())
}

/// Optimized derivation on a shared reader. Only hinted blocks have their
/// transactions scanned; every block of the range still contributes its
/// deposits.
pub fn derive_range_optimized_with(
    reader: &mut L1Reader<'_>,
    boot: &BootInfo,
    prefeed: &PrefeedSet,
    timeout_blocks: u64,
) -> Result<(DerivationOutput, NonceState), DeriveError> {
    let chain = reader.chain();
    check_range(chain, boot.l1_start, boot.l1_end)?;
    verify_header_chain(reader, boot)?;

    let mut sys = SystemConfig { batcher_address: boot.agreed_sender };
    let mut nonce: Option<NonceState> = None;
    let mut bank = ChannelBank::new(timeout_blocks);
    let mut batches: BTreeMap<u64, Vec<Vec<u8>>> = BTreeMap::new();

    let in_range = |n: &&u64| (boot.l1_start..=boot.l1_end).contains(*n);
    for &n in prefeed.da_blocks.iter().filter(in_range) {
        let block = reader.header(n)?;
        sys = gated_config_update(reader, block, sys)?.0;
        let batcher = sys.batcher_address;
        let elements = scan_block_txs(block, reader, |tx| {
            if tx.claimed_sender != batcher {
                return Ok(false);
            }
            if !chain.verify_tx(tx) {
                return Err(DeriveError::SenderMismatch { expected: batcher, observed: tx.claimed_sender, authenticated: false });
            }
            nonce = Some(match nonce {
                None => nonce_init(boot.agreed_sender, boot.agreed_nonce, tx)?,
                Some(state) => nonce_observe(state, tx)?,
            });
            Ok(true)
        })?;
        for element in elements {
            let records = bank.ingest(&element, reader)?;
            if !records.is_empty() {
                batches.entry(element.source_block).or_default().extend(records);
            }
        }
    }

    let epochs = group_epochs(boot.l1_start, boot.l1_end, batches, |n| {
        if reader.has_receipts(n) {
            return Ok(extract_deposits(reader.receipts(n)?));
        }
        let block = reader.header(n)?;
        if deposit_gate(block) {
            Ok(extract_deposits(reader.receipts(n)?))
        } else {
            Ok(vec![])
        }
    })?;
    let post = nonce.unwrap_or(NonceState { sender: boot.agreed_sender, expected_next_nonce: boot.agreed_nonce });
    Ok((DerivationOutput { epochs, final_sys: sys, ledger: reader.ledger() }, post))
}

/// Every header of the range must link back from the trusted head.
pub(crate) fn verify_header_chain(reader: &mut L1Reader<'_>, boot: &BootInfo) -> Result<(), DeriveError> {
    let head = reader.header(boot.l1_end)?;
    if head.hash != boot.l1_head {
        return Err(DeriveError::L1HeadMismatch { block: boot.l1_end, expected: boot.l1_head, found: head.hash });
    }
    let mut child = head;
    for n in (boot.l1_start..boot.l1_end).rev() {
        let block = reader.header(n)?;
        if child.parent_hash != block.hash {
            return Err(L1Error::ReorgDetected(child.number).into());
        }
        child = block;
    }
    Ok(())
}

/// The tracked post-state must equal what the range claims.
pub fn epilogue_check(post: &NonceState, boot: &BootInfo) -> Result<(), DeriveError> {
    if post.sender != boot.claimed_sender || post.expected_next_nonce != boot.claimed_nonce {
        return Err(DeriveError::BoundaryMismatch {
            tracked_sender: post.sender,
            tracked_nonce: post.expected_next_nonce,
            claimed_sender: boot.claimed_sender,
            claimed_nonce: boot.claimed_nonce,
        });
    }
    Ok(())
}
