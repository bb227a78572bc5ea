//! Synthetic L1 chain: blocks, transactions, receipts, and the read model the
//! derivation pipelines consume.

mod builder;
mod config;
mod generator;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bloom::{block_bloom, LogsBloom};
use crate::primitives::{hex_bytes, keccak256, keccak256_concat, Address, ChannelId, B256};

pub use builder::ChainBuilder;
pub use config::ScenarioConfig;
pub use generator::{build_chain, build_chain_with_length, default_batcher, l2_record};

/// Calldata batches must be sent to this address.
pub const BATCH_INBOX: Address = Address(hex20("ff00000000000000000000000000000000042069"));
/// The only contract whose `ConfigUpdate` events are honoured.
pub const SYSTEM_CONFIG: Address = Address(hex20("034edd2a225f7f429a63e0f1d2084b9e0a93b538"));
/// Deposit (forced inclusion) events are emitted here.
pub const OPTIMISM_PORTAL: Address = Address(hex20("16fc5058f25648194471939df75cf27a2fdc48bc"));
/// Owner key that sends `SystemConfig` update transactions.
pub const SYSTEM_CONFIG_OWNER: Address = Address(hex20("fd1d2e729ae8eee2e146c033bf4400fe75284301"));

/// `keccak256("ConfigUpdate(uint256,uint8,bytes)")`
pub const CONFIG_UPDATE_TOPIC: B256 =
    B256(hex32("1d2b0bda21d56b8bd12d4f94ebacffdfb35f5e226f84b461103bb8beab6353be"));
/// `keccak256("TransactionDeposited(address,address,uint256,bytes)")`
pub const DEPOSIT_TOPIC: B256 = B256(hex32("b3813568d9991fc951961fcb4c784893574240a28925604d09fc577c55bb7c32"));
/// `ConfigUpdate` update type for a batcher change.
pub const UPDATE_TYPE_BATCHER: B256 = B256::ZERO;

const fn hex_nibble(c: u8) -> u8 {
    match c {
        b'0'..=b'9' => c - b'0',
        b'a'..=b'f' => c - b'a' + 10,
        b'A'..=b'F' => c - b'A' + 10,
        _ => panic!("bad hex digit"),
    }
}

const fn hex_array<const N: usize>(s: &str) -> [u8; N] {
    let b = s.as_bytes();
    assert!(b.len() == 2 * N);
    let mut out = [0u8; N];
    let mut i = 0;
    while i < N {
        out[i] = (hex_nibble(b[2 * i]) << 4) | hex_nibble(b[2 * i + 1]);
        i += 1;
    }
    out
}

const fn hex20(s: &str) -> [u8; 20] {
    hex_array::<20>(s)
}

const fn hex32(s: &str) -> [u8; 32] {
    hex_array::<32>(s)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum L1Error {
    #[error("InvalidScenario: {0}")]
    InvalidScenario(String),
    #[error("OutOfRange: block {0} is not in the chain")]
    OutOfRange(u64),
    #[error("UnknownHash: {0}")]
    UnknownHash(B256),
    #[error("UnknownSigner: no registry secret for {0}")]
    UnknownSigner(Address),
    #[error("ReorgDetected: block {0} does not link to its parent")]
    ReorgDetected(u64),
    #[error("HeaderHashMismatch: block {0} contents do not match its hash")]
    HeaderHashMismatch(u64),
    #[error("BloomRecomputeViolation: block {0} bloom does not cover its receipts")]
    BloomRecomputeViolation(u64),
}

impl L1Error {
    pub fn code(&self) -> &'static str {
        match self {
            L1Error::InvalidScenario(_) => "InvalidScenario",
            L1Error::OutOfRange(_) => "OutOfRange",
            L1Error::UnknownHash(_) => "UnknownHash",
            L1Error::UnknownSigner(_) => "UnknownSigner",
            L1Error::ReorgDetected(_) => "ReorgDetected",
            L1Error::HeaderHashMismatch(_) => "HeaderHashMismatch",
            L1Error::BloomRecomputeViolation(_) => "BloomRecomputeViolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tx {
    pub claimed_sender: Address,
    pub to: Option<Address>,
    pub nonce: u64,
    #[serde(with = "hex_bytes")]
    pub calldata: Vec<u8>,
    pub blob_hashes: Vec<B256>,
    pub authenticator: B256,
}

impl Tx {
    pub fn is_blob(&self) -> bool {
        !self.blob_hashes.is_empty()
    }

    /// Canonical encoding of everything except the authenticator.
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.calldata.len() + 32 * self.blob_hashes.len());
        out.extend_from_slice(self.claimed_sender.as_bytes());
        match self.to {
            Some(to) => {
                out.push(1);
                out.extend_from_slice(to.as_bytes());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.nonce.to_be_bytes());
        out.extend_from_slice(&(self.calldata.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.calldata);
        out.extend_from_slice(&(self.blob_hashes.len() as u64).to_be_bytes());
        for h in &self.blob_hashes {
            out.extend_from_slice(h.as_bytes());
        }
        out
    }

    pub fn digest(&self) -> B256 {
        keccak256_concat([self.signing_payload().as_slice(), self.authenticator.as_bytes()])
    }
}

/// Keyed digest standing in for a signature.
pub fn authenticator_for(secret: &B256, tx: &Tx) -> B256 {
    keccak256_concat([secret.as_bytes(), tx.signing_payload().as_slice()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Log {
    pub address: Address,
    pub topics: Vec<B256>,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

/// EVM logs carry at most four topics.
pub const MAX_TOPICS: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub logs: Vec<Log>,
}

impl Receipt {
    pub fn digest(&self) -> B256 {
        let mut buf = Vec::new();
        for log in &self.logs {
            buf.extend_from_slice(log.address.as_bytes());
            buf.push(log.topics.len() as u8);
            for t in &log.topics {
                buf.extend_from_slice(t.as_bytes());
            }
            buf.extend_from_slice(&(log.data.len() as u64).to_be_bytes());
            buf.extend_from_slice(&log.data);
        }
        keccak256(buf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L1Block {
    pub number: u64,
    pub hash: B256,
    pub parent_hash: B256,
    pub timestamp: u64,
    pub txs: Vec<Tx>,
    pub receipts: Vec<Receipt>,
    pub logs_bloom: LogsBloom,
}

impl L1Block {
    /// Digest over number, parent, timestamp, tx digests, receipt digests and bloom.
    pub fn compute_hash(&self) -> B256 {
        let mut buf = Vec::with_capacity(80 + 32 * (self.txs.len() + self.receipts.len()) + 256);
        buf.extend_from_slice(&self.number.to_be_bytes());
        buf.extend_from_slice(self.parent_hash.as_bytes());
        buf.extend_from_slice(&self.timestamp.to_be_bytes());
        buf.extend_from_slice(&(self.txs.len() as u64).to_be_bytes());
        for tx in &self.txs {
            buf.extend_from_slice(tx.digest().as_bytes());
        }
        buf.extend_from_slice(&(self.receipts.len() as u64).to_be_bytes());
        for r in &self.receipts {
            buf.extend_from_slice(r.digest().as_bytes());
        }
        buf.extend_from_slice(&self.logs_bloom.0);
        keccak256(buf)
    }

    pub fn seal(&mut self) {
        self.hash = self.compute_hash();
    }

    pub fn log_count(&self) -> u64 {
        self.receipts.iter().map(|r| r.logs.len() as u64).sum()
    }

    pub fn blob_count(&self) -> u64 {
        self.txs.iter().map(|t| t.blob_hashes.len() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub batcher_address: Address,
}

/// A channel the generator posted, kept for ground-truth assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostedChannel {
    pub id: ChannelId,
    pub first_l2_block: u64,
    pub last_l2_block: u64,
    pub records: Vec<Vec<u8>>,
    /// `(l1 block, tx index)` of every frame, in posting order.
    pub frames: Vec<(u64, usize)>,
}

impl PostedChannel {
    /// Block of the final frame, where derivation completes the channel.
    pub fn completed_at(&self) -> u64 {
        self.frames.last().map(|f| f.0).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub channels: Vec<PostedChannel>,
    /// `(l1 block, deposit data)` in L1 order.
    pub deposits: Vec<(u64, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub blocks: Vec<L1Block>,
    pub key_registry: BTreeMap<Address, B256>,
    pub system_config_genesis: SystemConfig,
    pub blobs: BTreeMap<B256, Vec<u8>>,
    pub ground_truth: GroundTruth,
    hash_index: HashMap<B256, u64>,
}

impl Chain {
    pub fn new(
        blocks: Vec<L1Block>,
        key_registry: BTreeMap<Address, B256>,
        system_config_genesis: SystemConfig,
        blobs: BTreeMap<B256, Vec<u8>>,
        ground_truth: GroundTruth,
    ) -> Self {
        let mut chain = Self { blocks, key_registry, system_config_genesis, blobs, ground_truth, hash_index: HashMap::new() };
        chain.reindex();
        chain
    }

    fn reindex(&mut self) {
        self.hash_index = self.blocks.iter().map(|b| (b.hash, b.number)).collect();
    }

    pub fn len(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &L1Block {
        self.blocks.last().expect("chain has a genesis block")
    }

    pub fn block_by_number(&self, n: u64) -> Result<&L1Block, L1Error> {
        self.blocks.get(n as usize).ok_or(L1Error::OutOfRange(n))
    }

    pub fn block_by_hash(&self, h: &B256) -> Result<&L1Block, L1Error> {
        let n = self.hash_index.get(h).ok_or(L1Error::UnknownHash(*h))?;
        self.block_by_number(*n)
    }

    pub fn receipts_by_hash(&self, h: &B256) -> Result<&[Receipt], L1Error> {
        Ok(&self.block_by_hash(h)?.receipts)
    }

    pub fn blob(&self, hash: &B256) -> Option<&[u8]> {
        self.blobs.get(hash).map(Vec::as_slice)
    }

    pub fn sign_tx(&self, sender: Address, mut tx: Tx) -> Result<Tx, L1Error> {
        let secret = self.key_registry.get(&sender).ok_or(L1Error::UnknownSigner(sender))?;
        tx.claimed_sender = sender;
        tx.authenticator = authenticator_for(secret, &tx);
        Ok(tx)
    }

    /// True iff the authenticator was produced with the claimed sender's secret.
    pub fn verify_tx(&self, tx: &Tx) -> bool {
        self.key_registry
            .get(&tx.claimed_sender)
            .is_some_and(|secret| authenticator_for(secret, tx) == tx.authenticator)
    }

    /// Mutable access for fixtures and adversarial rewrites. Call
    /// [`Chain::reseal_from`] afterwards to restore hash linkage.
    pub fn block_mut(&mut self, n: u64) -> Option<&mut L1Block> {
        self.blocks.get_mut(n as usize)
    }

    /// Recomputes the bloom (unless `keep_bloom`) and hash of block `n` and
    /// relinks every descendant.
    pub fn reseal_from(&mut self, n: u64, keep_bloom: bool) {
        let start = n as usize;
        for i in start..self.blocks.len() {
            if i > 0 {
                self.blocks[i].parent_hash = self.blocks[i - 1].hash;
            }
            if i == start && !keep_bloom {
                let bloom = block_bloom(&self.blocks[i].receipts);
                self.blocks[i].logs_bloom = bloom;
            }
            self.blocks[i].seal();
        }
        self.reindex();
    }

    /// Recomputes one block's hash and nothing else, leaving descendants
    /// pointing at the old hash.
    pub fn reseal_single(&mut self, n: u64) {
        if let Some(b) = self.blocks.get_mut(n as usize) {
            b.seal();
        }
        self.reindex();
    }

    /// Checks hash integrity, parent linkage, and that every header bloom
    /// covers the bloom recomputed from its receipts.
    pub fn verify_integrity(&self) -> Result<(), L1Error> {
        for (i, block) in self.blocks.iter().enumerate() {
            if block.number != i as u64 {
                return Err(L1Error::OutOfRange(block.number));
            }
            if i > 0 && block.parent_hash != self.blocks[i - 1].hash {
                return Err(L1Error::ReorgDetected(block.number));
            }
            if block.compute_hash() != block.hash {
                return Err(L1Error::HeaderHashMismatch(block.number));
            }
            verify_block_bloom(block)?;
        }
        Ok(())
    }

    /// Total transaction count over `[from, to]`.
    pub fn tx_count(&self, from: u64, to: u64) -> u64 {
        self.blocks[from as usize..=to as usize].iter().map(|b| b.txs.len() as u64).sum()
    }
}

/// The header bloom must contain every bit the receipts imply.
pub fn verify_block_bloom(block: &L1Block) -> Result<(), L1Error> {
    if block_bloom(&block.receipts).is_subset_of(&block.logs_bloom) {
        Ok(())
    } else {
        Err(L1Error::BloomRecomputeViolation(block.number))
    }
}
