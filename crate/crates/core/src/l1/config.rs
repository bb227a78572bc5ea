use serde::{Deserialize, Serialize};

use super::{L1Error, SystemConfig};
use crate::primitives::Address;

/// Knobs for the synthetic chain generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub l1_block_time_s: u64,
    pub l2_block_time_s: u64,
    pub range_l2_blocks: u64,
    pub channel_timeout_s: u64,
    pub noise_txs_per_block: u32,
    pub noise_logs_per_tx: u32,
    /// `(sender, activation L1 block)`, activations strictly increasing.
    pub batcher_schedule: Vec<(Address, u64)>,
    /// `(start L1 block, length in blocks)`.
    pub outage_windows: Vec<(u64, u64)>,
    pub post_outage_cap: u32,
    pub forced_bloom_fp: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            l1_block_time_s: 12,
            l2_block_time_s: 2,
            range_l2_blocks: 400,
            channel_timeout_s: 100,
            noise_txs_per_block: 20,
            noise_logs_per_tx: 2,
            batcher_schedule: vec![(super::default_batcher(), 0)],
            outage_windows: vec![],
            post_outage_cap: 1,
            forced_bloom_fp: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, L1Error> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| L1Error::InvalidScenario(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), L1Error> {
        let bad = |msg: &str| Err(L1Error::InvalidScenario(msg.to_string()));
        if self.channel_timeout_s == 0 {
            return bad("channel_timeout_s must be positive");
        }
        if self.range_l2_blocks == 0 {
            return bad("range_l2_blocks must be positive");
        }
        if self.l1_block_time_s == 0 || self.l2_block_time_s == 0 {
            return bad("block times must be positive");
        }
        if self.post_outage_cap == 0 {
            return bad("post_outage_cap must be at least 1");
        }
        match self.batcher_schedule.first() {
            None => return bad("batcher_schedule is empty"),
            Some(&(_, first)) if first != 0 => return bad("first batcher activation must be at genesis"),
            _ => {}
        }
        if self.batcher_schedule.windows(2).any(|w| w[0].1 >= w[1].1) {
            return bad("batcher_schedule activations must be strictly increasing");
        }
        let mut windows: Vec<_> = self.outage_windows.iter().filter(|w| w.1 > 0).copied().collect();
        windows.sort();
        if windows.iter().any(|w| w.0 == 0) {
            return bad("outage window cannot cover genesis");
        }
        if windows.windows(2).any(|w| w[0].0 + w[0].1 > w[1].0) {
            return bad("outage windows overlap");
        }
        Ok(())
    }

    pub fn genesis_system_config(&self) -> SystemConfig {
        SystemConfig { batcher_address: self.batcher_schedule.first().map(|b| b.0).unwrap_or_default() }
    }

    /// Batcher posting cadence in L1 blocks: `ceil(channel_timeout / l1_block_time)`.
    pub fn channel_period_blocks(&self) -> u64 {
        self.channel_timeout_s.div_ceil(self.l1_block_time_s).max(1)
    }

    /// Channel timeout expressed in L1 blocks.
    pub fn channel_timeout_blocks(&self) -> u64 {
        self.channel_period_blocks()
    }

    /// L1 blocks spanned by one proof range: the L1 time of `range_l2_blocks`
    /// L2 blocks plus one channel timeout for their batches to land.
    pub fn range_span_l1_blocks(&self) -> u64 {
        (self.range_l2_blocks * self.l2_block_time_s).div_ceil(self.l1_block_time_s) + self.channel_period_blocks()
    }

    pub fn in_outage(&self, n: u64) -> bool {
        self.outage_windows.iter().any(|&(start, len)| n >= start && n < start + len)
    }

    /// Batcher per the schedule at block `n` (inclusive of activations at `n`).
    pub fn scheduled_batcher(&self, n: u64) -> Address {
        self.batcher_schedule
            .iter()
            .take_while(|(_, at)| *at <= n)
            .last()
            .map(|b| b.0)
            .unwrap_or_default()
    }
}
