use std::collections::BTreeMap;

use super::{Chain, GroundTruth, L1Block, Receipt, SystemConfig, Tx};
use crate::bloom::{block_bloom, LogsBloom};
use crate::primitives::{keccak256, Address, B256};

pub const GENESIS_TIMESTAMP: u64 = 1_700_000_000;

/// Appends sealed blocks on top of a genesis block. Used by the generator and
/// by hand-written fixtures.
#[derive(Debug, Clone)]
pub struct ChainBuilder {
    blocks: Vec<L1Block>,
    registry: BTreeMap<Address, B256>,
    genesis_sys: SystemConfig,
    blobs: BTreeMap<B256, Vec<u8>>,
    truth: GroundTruth,
    block_time: u64,
    forced_bloom_fp: bool,
}

impl ChainBuilder {
    pub fn new(genesis_sys: SystemConfig) -> Self {
        Self::with_block_time(genesis_sys, 12)
    }

    pub fn with_block_time(genesis_sys: SystemConfig, block_time: u64) -> Self {
        let mut genesis = L1Block {
            number: 0,
            hash: B256::ZERO,
            parent_hash: B256::ZERO,
            timestamp: GENESIS_TIMESTAMP,
            txs: vec![],
            receipts: vec![],
            logs_bloom: LogsBloom::EMPTY,
        };
        genesis.seal();
        Self {
            blocks: vec![genesis],
            registry: BTreeMap::new(),
            genesis_sys,
            blobs: BTreeMap::new(),
            truth: GroundTruth::default(),
            block_time,
            forced_bloom_fp: false,
        }
    }

    /// Every subsequent block gets an all-ones bloom.
    pub fn force_bloom_fp(&mut self, on: bool) {
        self.forced_bloom_fp = on;
    }

    /// Registers a deterministic secret for `addr` derived from `label`.
    pub fn register_key(&mut self, addr: Address, label: &[u8]) {
        let secret = keccak256([b"registry-secret:".as_slice(), label, addr.as_bytes()].concat());
        self.registry.insert(addr, secret);
    }

    pub fn secret(&self, addr: &Address) -> Option<&B256> {
        self.registry.get(addr)
    }

    /// Signs with a registered key. Panics if `sender` has no key.
    pub fn sign(&self, sender: Address, mut tx: Tx) -> Tx {
        let secret = self.registry.get(&sender).expect("sender must be registered");
        tx.claimed_sender = sender;
        tx.authenticator = super::authenticator_for(secret, &tx);
        tx
    }

    /// Stores a blob and returns its versioned hash.
    pub fn add_blob(&mut self, data: Vec<u8>) -> B256 {
        let hash = blob_hash(&data);
        self.blobs.insert(hash, data);
        hash
    }

    pub fn ground_truth_mut(&mut self) -> &mut GroundTruth {
        &mut self.truth
    }

    pub fn next_number(&self) -> u64 {
        self.blocks.len() as u64
    }

    /// Seals a block from `(tx, receipt)` pairs and returns its number.
    pub fn push_block(&mut self, entries: Vec<(Tx, Receipt)>) -> u64 {
        let parent = self.blocks.last().expect("genesis present");
        let number = parent.number + 1;
        let (txs, receipts): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let logs_bloom = if self.forced_bloom_fp { LogsBloom::FULL } else { block_bloom(&receipts) };
        let mut block = L1Block {
            number,
            hash: B256::ZERO,
            parent_hash: parent.hash,
            timestamp: parent.timestamp + self.block_time,
            txs,
            receipts,
            logs_bloom,
        };
        block.seal();
        self.blocks.push(block);
        number
    }

    pub fn push_empty_blocks(&mut self, count: u64) {
        for _ in 0..count {
            self.push_block(vec![]);
        }
    }

    pub fn finish(self) -> Chain {
        Chain::new(self.blocks, self.registry, self.genesis_sys, self.blobs, self.truth)
    }
}

/// Versioned blob hash: Keccak-256 of the data with the first byte set to `0x01`.
pub fn blob_hash(data: &[u8]) -> B256 {
    let mut h = keccak256(data);
    h.0[0] = 0x01;
    h
}
