//! Seeded generator for batcher, noise, deposit and config-update traffic.
//!
//! L2 block `j` (for `j >= 1`) is available to the batcher once
//! `j * l2_block_time <= n * l1_block_time` at L1 block `n`. Outside outages
//! the batcher cuts a channel every `ceil(channel_timeout / l1_block_time)`
//! blocks from the L2 blocks not yet batched, at most one period's worth per
//! channel, and posts each frame as its own transaction. After an outage it
//! cuts the whole backlog at once and drains the queue at no more than
//! `post_outage_cap` transactions per block.
//!
//! Deposits land every `k`-th block with `k` drawn from `3..=8` by the seed
//! and carry 0 to 2 deposit logs.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::builder::{ChainBuilder, GENESIS_TIMESTAMP};
use super::{
    Chain, L1Error, Log, PostedChannel, Receipt, ScenarioConfig, Tx, BATCH_INBOX, CONFIG_UPDATE_TOPIC,
    DEPOSIT_TOPIC, OPTIMISM_PORTAL, SYSTEM_CONFIG, SYSTEM_CONFIG_OWNER, UPDATE_TYPE_BATCHER,
};
use crate::derive::frame::{encode_batch_records, encode_tx_data, split_into_frames, Frame, BLOB_THRESHOLD, MAX_FRAME_PAYLOAD};
use crate::primitives::{keccak256, keccak256_concat, Address, ChannelId, B256};

/// The genesis batcher used by [`ScenarioConfig::default`].
pub fn default_batcher() -> Address {
    label_address(b"batcher-0")
}

fn label_address(label: &[u8]) -> Address {
    Address::from_slice(&keccak256(label).0[12..]).expect("20 bytes")
}

/// Opaque batch record for L2 block `j`: number, timestamp, seeded filler.
pub fn l2_record(seed: u64, j: u64, l2_block_time_s: u64) -> Vec<u8> {
    let digest = keccak256_concat([b"l2-block".as_slice(), &seed.to_be_bytes(), &j.to_be_bytes()]);
    let filler_len = 84 + (digest.0[0] % 32) as usize;
    let mut out = Vec::with_capacity(16 + filler_len);
    out.extend_from_slice(&j.to_be_bytes());
    out.extend_from_slice(&(GENESIS_TIMESTAMP + j * l2_block_time_s).to_be_bytes());
    out.extend(digest.0.iter().cycle().take(filler_len));
    out
}

pub fn build_chain(cfg: &ScenarioConfig) -> Result<Chain, L1Error> {
    cfg.validate()?;
    let outage_end = cfg.outage_windows.iter().map(|w| w.0 + w.1).max().unwrap_or(0);
    let min_len = (1 + cfg.range_span_l1_blocks()).max(outage_end + 1);
    Generator::new(cfg).run(min_len, true)
}

/// Exactly `n_blocks` blocks including genesis; the backlog may be left undrained.
pub fn build_chain_with_length(cfg: &ScenarioConfig, n_blocks: u64) -> Result<Chain, L1Error> {
    cfg.validate()?;
    Generator::new(cfg).run(n_blocks.max(1), false)
}

struct QueuedFrame {
    channel: usize,
    frame: Frame,
}

struct Generator<'a> {
    cfg: &'a ScenarioConfig,
    rng: ChaCha8Rng,
    builder: ChainBuilder,
    deposit_every: u64,
    channeled_upto: u64,
    queue: VecDeque<QueuedFrame>,
    draining: bool,
    channel_counter: u64,
    owner_nonce: u64,
    batcher_nonces: std::collections::BTreeMap<Address, u64>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let deposit_every = rng.gen_range(3..=8);
        let mut builder = ChainBuilder::with_block_time(cfg.genesis_system_config(), cfg.l1_block_time_s);
        builder.force_bloom_fp(cfg.forced_bloom_fp);
        for (addr, _) in &cfg.batcher_schedule {
            builder.register_key(*addr, &cfg.seed.to_be_bytes());
        }
        builder.register_key(SYSTEM_CONFIG_OWNER, &cfg.seed.to_be_bytes());
        Self {
            cfg,
            rng,
            builder,
            deposit_every,
            channeled_upto: 0,
            queue: VecDeque::new(),
            draining: false,
            channel_counter: 0,
            owner_nonce: 0,
            batcher_nonces: Default::default(),
        }
    }

    fn run(mut self, min_len: u64, drain: bool) -> Result<Chain, L1Error> {
        while self.builder.next_number() < min_len || (drain && !self.queue.is_empty()) {
            self.step();
        }
        Ok(self.builder.finish())
    }

    fn available_l2(&self, n: u64) -> u64 {
        n * self.cfg.l1_block_time_s / self.cfg.l2_block_time_s
    }

    fn max_l2_per_channel(&self) -> u64 {
        let per_l1 = self.cfg.l1_block_time_s.div_ceil(self.cfg.l2_block_time_s).max(1);
        self.cfg.channel_period_blocks() * per_l1
    }

    fn cut_channels(&mut self, n: u64) {
        let avail = self.available_l2(n);
        while self.channeled_upto < avail {
            let take = (avail - self.channeled_upto).min(self.max_l2_per_channel());
            let first = self.channeled_upto + 1;
            let last = self.channeled_upto + take;
            let records: Vec<Vec<u8>> =
                (first..=last).map(|j| l2_record(self.cfg.seed, j, self.cfg.l2_block_time_s)).collect();
            let id_digest = keccak256_concat([
                b"channel".as_slice(),
                &self.cfg.seed.to_be_bytes(),
                &self.channel_counter.to_be_bytes(),
            ]);
            self.channel_counter += 1;
            let id = ChannelId::from_slice(&id_digest.0[..16]).expect("16 bytes");
            let payload = encode_batch_records(&records);
            let channel = self.builder.ground_truth_mut().channels.len();
            self.builder.ground_truth_mut().channels.push(PostedChannel {
                id,
                first_l2_block: first,
                last_l2_block: last,
                records,
                frames: vec![],
            });
            for frame in split_into_frames(id, &payload, MAX_FRAME_PAYLOAD) {
                self.queue.push_back(QueuedFrame { channel, frame });
            }
            self.channeled_upto = last;
        }
    }

    fn random_word(&mut self) -> B256 {
        B256(self.rng.gen())
    }

    fn random_address(&mut self) -> Address {
        Address(self.rng.gen())
    }

    fn noise_entry(&mut self) -> (Tx, Receipt) {
        let to = if self.rng.gen_bool(0.02) { BATCH_INBOX } else { self.random_address() };
        let calldata_len = self.rng.gen_range(0..64);
        let calldata: Vec<u8> = (0..calldata_len).map(|_| self.rng.gen()).collect();
        let blob_hashes = if self.rng.gen_bool(0.1) {
            let count = self.rng.gen_range(1..=2);
            (0..count).map(|_| self.random_word()).collect()
        } else {
            vec![]
        };
        let tx = Tx {
            claimed_sender: self.random_address(),
            to: Some(to),
            nonce: self.rng.gen_range(0..1_000),
            calldata,
            blob_hashes,
            authenticator: self.random_word(),
        };
        let logs = (0..self.cfg.noise_logs_per_tx)
            .map(|_| {
                let topic_count = self.rng.gen_range(1..=3);
                let data_len = self.rng.gen_range(0..32);
                Log {
                    address: self.random_address(),
                    topics: (0..topic_count).map(|_| self.random_word()).collect(),
                    data: (0..data_len).map(|_| self.rng.gen()).collect(),
                }
            })
            .collect();
        (tx, Receipt { logs })
    }

    fn deposit_entry(&mut self) -> (Tx, Receipt) {
        let depositor = self.random_address();
        let count = self.rng.gen_range(0..=2);
        let logs = (0..count)
            .map(|_| {
                let recipient = self.random_address();
                let data: Vec<u8> = (0..64).map(|_| self.rng.gen()).collect();
                Log {
                    address: OPTIMISM_PORTAL,
                    topics: vec![DEPOSIT_TOPIC, depositor.to_word(), recipient.to_word(), B256::ZERO],
                    data,
                }
            })
            .collect();
        let tx = Tx {
            claimed_sender: depositor,
            to: Some(OPTIMISM_PORTAL),
            nonce: self.rng.gen_range(0..1_000),
            calldata: vec![0xde, 0x90],
            blob_hashes: vec![],
            authenticator: self.random_word(),
        };
        (tx, Receipt { logs })
    }

    fn config_update_entry(&mut self, new_batcher: Address) -> (Tx, Receipt) {
        let word = new_batcher.to_word();
        let tx = Tx {
            claimed_sender: SYSTEM_CONFIG_OWNER,
            to: Some(SYSTEM_CONFIG),
            nonce: self.owner_nonce,
            calldata: word.0.to_vec(),
            blob_hashes: vec![],
            authenticator: B256::ZERO,
        };
        self.owner_nonce += 1;
        let tx = self.builder.sign(SYSTEM_CONFIG_OWNER, tx);
        let log = Log {
            address: SYSTEM_CONFIG,
            topics: vec![CONFIG_UPDATE_TOPIC, B256::ZERO, UPDATE_TYPE_BATCHER],
            data: word.0.to_vec(),
        };
        (tx, Receipt { logs: vec![log] })
    }

    fn batcher_entry(&mut self, batcher: Address, frame: &Frame) -> (Tx, Receipt) {
        let data = encode_tx_data(std::slice::from_ref(frame));
        let nonce = self.batcher_nonces.entry(batcher).or_insert(0);
        let mut tx = Tx {
            claimed_sender: batcher,
            to: Some(BATCH_INBOX),
            nonce: *nonce,
            calldata: vec![],
            blob_hashes: vec![],
            authenticator: B256::ZERO,
        };
        *nonce += 1;
        if data.len() > BLOB_THRESHOLD {
            tx.blob_hashes = vec![self.builder.add_blob(data)];
        } else {
            tx.calldata = data;
        }
        (self.builder.sign(batcher, tx), Receipt::default())
    }

    fn step(&mut self) {
        let n = self.builder.next_number();
        let cfg = self.cfg;
        let mut entries = Vec::new();

        if let Some(&(new_batcher, _)) = cfg.batcher_schedule.iter().skip(1).find(|(_, at)| *at == n) {
            entries.push(self.config_update_entry(new_batcher));
        }
        if n.is_multiple_of(self.deposit_every) {
            entries.push(self.deposit_entry());
        }
        for _ in 0..cfg.noise_txs_per_block {
            entries.push(self.noise_entry());
        }

        let mut batcher_txs = Vec::new();
        if !cfg.in_outage(n) {
            let resumed = n > 1 && cfg.in_outage(n - 1);
            if resumed {
                self.draining = true;
            }
            if resumed || n.is_multiple_of(cfg.channel_period_blocks()) {
                self.cut_channels(n);
            }
            let cap = if self.draining { cfg.post_outage_cap as usize } else { usize::MAX };
            let batcher = cfg.scheduled_batcher(n);
            while batcher_txs.len() < cap {
                let Some(queued) = self.queue.pop_front() else { break };
                let entry = self.batcher_entry(batcher, &queued.frame);
                batcher_txs.push((queued.channel, entry));
            }
            if self.queue.is_empty() {
                self.draining = false;
            }
        }

        // Batcher txs keep their relative order but land at seeded positions.
        let fixed = entries.len() - cfg.noise_txs_per_block as usize;
        let mut positions: Vec<usize> =
            batcher_txs.iter().map(|_| self.rng.gen_range(fixed..=entries.len())).collect();
        positions.sort_unstable();
        for (offset, (pos, (channel, entry))) in positions.into_iter().zip(batcher_txs).enumerate() {
            let index = pos + offset;
            entries.insert(index, entry);
            self.builder.ground_truth_mut().channels[channel].frames.push((n, index));
        }
        // Earlier inserts shift later recorded indices; rewrite them from the final order.
        self.fix_frame_indices(n, &entries);

        for (tx, receipt) in &entries {
            if tx.to == Some(OPTIMISM_PORTAL) {
                for log in receipt.logs.iter().filter(|l| l.address == OPTIMISM_PORTAL) {
                    self.builder.ground_truth_mut().deposits.push((n, log.data.clone()));
                }
            }
        }
        self.builder.push_block(entries);
    }

    fn fix_frame_indices(&mut self, n: u64, entries: &[(Tx, Receipt)]) {
        let batcher_positions: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, (tx, _))| self.cfg.batcher_schedule.iter().any(|b| b.0 == tx.claimed_sender))
            .map(|(i, _)| i)
            .collect();
        let mut cursor = batcher_positions.into_iter();
        for channel in self.builder.ground_truth_mut().channels.iter_mut() {
            for frame in channel.frames.iter_mut().filter(|f| f.0 == n) {
                frame.1 = cursor.next().expect("every frame has a tx");
            }
        }
    }
}
