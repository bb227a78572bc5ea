//! The three cost experiments: channel-timeout scaling, forced bloom false
//! positives, and a batcher outage replay.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::derive_range_baseline;
use crate::cost::{diff_percent, CostError, CostLedger, CostWeights};
use crate::derive::DeriveError;
use crate::l1::{build_chain, build_chain_with_length, Chain, L1Error, ScenarioConfig};
use crate::optimized::{compute_prefeed_set, BootInfo, PipelineMode};
use crate::program::{run_range, RunPolicy};

pub const DEFAULT_TIMEOUTS: [u64; 5] = [10, 50, 100, 200, 500];
/// Outage length of the replayed incident, in L1 blocks.
pub const DEFAULT_OUTAGE_BLOCKS: u64 = 750;
/// Post-outage ranges derived after the backlog has drained.
const TRAILING_RANGES: u64 = 2;
/// A range counts as elevated when its total exceeds the pre-outage level by this factor.
pub const ELEVATION_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    L1(#[from] L1Error),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("EquivalenceViolation: pipelines disagree on range [{start}, {end}]")]
    EquivalenceViolation { start: u64, end: u64 },
    #[error("InvalidExperiment: {0}")]
    Invalid(String),
}

impl ExperimentError {
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::L1(e) => e.code(),
            ExperimentError::Derive(e) => e.code(),
            ExperimentError::Cost(e) => e.code(),
            ExperimentError::EquivalenceViolation { .. } => "EquivalenceViolation",
            ExperimentError::Invalid(_) => "InvalidExperiment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Total,
    Derivation,
    Receipt,
}

impl Metric {
    fn of(self, l: &CostLedger) -> u64 {
        match self {
            Metric::Total => l.total,
            Metric::Derivation => l.derivation,
            Metric::Receipt => l.receipt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub label: String,
    pub l1_blocks: u64,
    pub l1_txs: u64,
    pub baseline: CostLedger,
    pub optimized: CostLedger,
}

impl ExperimentRow {
    /// Always recomputed from the two ledgers.
    pub fn diff(&self, metric: Metric) -> Result<f64, CostError> {
        diff_percent(metric.of(&self.baseline), metric.of(&self.optimized))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
}

pub const CSV_HEADER: &str = "label,l1_blocks,l1_txs,\
baseline_total,optimized_total,diff_total_pct,\
baseline_derivation,optimized_derivation,diff_derivation_pct,\
baseline_receipt,optimized_receipt,diff_receipt_pct";

impl ExperimentResult {
    pub fn to_csv(&self) -> Result<String, CostError> {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{},{}", r.label, r.l1_blocks, r.l1_txs).expect("string write");
            for m in [Metric::Total, Metric::Derivation, Metric::Receipt] {
                write!(out, ",{},{},{:.2}", m.of(&r.baseline), m.of(&r.optimized), r.diff(m)?).expect("string write");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Both pipelines over `[l1_start, l1_end]` of `chain`. The optimized side
/// pays for change detection as well. Errors if the outputs differ.
pub fn compare_range(
    chain: &Chain,
    cfg: &ScenarioConfig,
    weights: CostWeights,
    l1_start: u64,
    l1_end: u64,
) -> Result<(CostLedger, CostLedger, PipelineMode), ExperimentError> {
    let baseline = derive_range_baseline(chain, l1_start, l1_end, cfg, weights)?;
    let boot = BootInfo::honest(chain, l1_start, l1_end)?;
    let prefeed = compute_prefeed_set(chain, l1_start, l1_end)?;
    let optimized = run_range(chain, &boot, &prefeed, cfg, weights, RunPolicy::Auto)?;
    if optimized.output.canonical_json() != baseline.canonical_json() {
        return Err(ExperimentError::EquivalenceViolation { start: l1_start, end: l1_end });
    }
    Ok((baseline.ledger, optimized.output.ledger, optimized.mode))
}

fn timeout_row(base: &ScenarioConfig, weights: CostWeights, timeout: u64) -> Result<ExperimentRow, ExperimentError> {
    let cfg = ScenarioConfig { channel_timeout_s: timeout, ..base.clone() };
    cfg.validate()?;
    let chain = build_chain(&cfg)?;
    let end = cfg.range_span_l1_blocks();
    let (baseline, optimized, _) = compare_range(&chain, &cfg, weights, 1, end)?;
    Ok(ExperimentRow { label: format!("{timeout}s"), l1_blocks: end, l1_txs: chain.tx_count(1, end), baseline, optimized })
}

fn timeout_sweep(base: &ScenarioConfig, weights: CostWeights, timeouts: &[u64]) -> Result<ExperimentResult, ExperimentError> {
    if timeouts.is_empty() {
        return Err(ExperimentError::Invalid("timeouts must be nonempty".into()));
    }
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = timeouts.iter().map(|&t| s.spawn(move || timeout_row(base, weights, t))).collect();
        handles.into_iter().map(|h| h.join().expect("row worker panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(ExperimentResult { rows })
}

/// One range of `range_l2_blocks` L2 blocks per channel timeout.
pub fn run_experiment_1(base: &ScenarioConfig, weights: CostWeights, timeouts: &[u64]) -> Result<ExperimentResult, ExperimentError> {
    timeout_sweep(&ScenarioConfig { forced_bloom_fp: false, ..base.clone() }, weights, timeouts)
}

/// Experiment 1 with every header bloom saturated.
pub fn run_experiment_2(base: &ScenarioConfig, weights: CostWeights, timeouts: &[u64]) -> Result<ExperimentResult, ExperimentError> {
    timeout_sweep(&ScenarioConfig { forced_bloom_fp: true, ..base.clone() }, weights, timeouts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutagePoint {
    pub index: u64,
    pub l1_start: u64,
    pub l1_end: u64,
    pub baseline_total: u64,
    pub optimized_total: u64,
    pub mode: PipelineMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutageSeries {
    pub outage_start: u64,
    pub outage_blocks: u64,
    pub points: Vec<OutagePoint>,
}

impl OutageSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("range,l1_start,l1_end,baseline_total,optimized_total\n");
        for p in &self.points {
            writeln!(out, "{},{},{},{},{}", p.index, p.l1_start, p.l1_end, p.baseline_total, p.optimized_total)
                .expect("string write");
        }
        out
    }

    /// Two-column `range total` plot data for one pipeline.
    pub fn plot_data(&self, mode: PipelineMode) -> String {
        let mut out = format!("# range {mode}_total\n");
        for p in &self.points {
            let total = match mode {
                PipelineMode::Baseline => p.baseline_total,
                PipelineMode::Optimized => p.optimized_total,
            };
            writeln!(out, "{} {}", p.index, total).expect("string write");
        }
        out
    }

    /// Peak optimized total over peak baseline total.
    pub fn peak_ratio(&self) -> f64 {
        let peak = |f: fn(&OutagePoint) -> u64| self.points.iter().map(f).max().unwrap_or(0) as f64;
        peak(|p| p.optimized_total) / peak(|p| p.baseline_total)
    }

    fn pre_outage(&self) -> impl Iterator<Item = &OutagePoint> {
        self.points.iter().filter(move |p| p.l1_end < self.outage_start)
    }

    fn post_outage(&self) -> impl Iterator<Item = &OutagePoint> {
        let end = self.outage_start + self.outage_blocks;
        self.points.iter().filter(move |p| p.l1_end >= end)
    }

    /// Post-outage ranges where both pipelines exceed their highest
    /// pre-outage total by [`ELEVATION_FACTOR`].
    pub fn elevated_ranges(&self) -> usize {
        let level = |f: fn(&OutagePoint) -> u64| self.pre_outage().map(f).max().unwrap_or(0) as f64 * ELEVATION_FACTOR;
        let (base, opt) = (level(|p| p.baseline_total), level(|p| p.optimized_total));
        self.post_outage().filter(|p| p.baseline_total as f64 > base && p.optimized_total as f64 > opt).count()
    }
}

/// Scenario defaults for the outage replay. A 50 s channel timeout has the
/// batcher post every 5 L1 blocks, so a 750-block backlog drains at one
/// transaction per block over about two ranges.
pub fn experiment_3_base() -> ScenarioConfig {
    ScenarioConfig { channel_timeout_s: 50, ..ScenarioConfig::default() }
}

/// Consecutive ranges across an outage of `outage_blocks` L1 blocks that
/// starts after two ranges of normal operation, continuing until the backlog
/// has drained plus [`TRAILING_RANGES`] more. A zero-length outage gives
/// the steady-state series.
pub fn run_experiment_3(base: &ScenarioConfig, weights: CostWeights, outage_blocks: u64) -> Result<OutageSeries, ExperimentError> {
    let span = base.range_span_l1_blocks();
    let outage_start = 2 * span + 1;
    let cfg = ScenarioConfig { outage_windows: vec![(outage_start, outage_blocks)], forced_bloom_fp: false, ..base.clone() };
    cfg.validate()?;
    // Drained chain length tells how far the backlog reaches.
    let drained = build_chain(&cfg)?.len();
    let ranges = (drained - 1).div_ceil(span) + TRAILING_RANGES;
    let chain = build_chain_with_length(&cfg, ranges * span + 1)?;
    let bounds: Vec<(u64, u64, u64)> = (0..ranges).map(|i| (i, i * span + 1, (i + 1) * span)).collect();
    let points = std::thread::scope(|s| {
        let chain = &chain;
        let cfg = &cfg;
        let handles: Vec<_> = bounds
            .chunks(bounds.len().div_ceil(8).max(1))
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&(index, l1_start, l1_end)| {
                            let (b, o, mode) = compare_range(chain, cfg, weights, l1_start, l1_end)?;
                            Ok(OutagePoint {
                                index,
                                l1_start,
                                l1_end,
                                baseline_total: b.total,
                                optimized_total: o.total,
                                mode,
                            })
                        })
                        .collect::<Result<Vec<_>, ExperimentError>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("range worker panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(OutageSeries { outage_start, outage_blocks, points: points.into_iter().flatten().collect() })
}

/// A seeded scenario without batcher changes and a sub-range of at most 400
/// L1 blocks, for the equivalence check.
pub fn equivalence_scenario(seed: u64) -> (ScenarioConfig, u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = ScenarioConfig {
        seed,
        channel_timeout_s: rng.gen_range(6..=600),
        range_l2_blocks: rng.gen_range(20..=800),
        noise_txs_per_block: rng.gen_range(0..=12),
        noise_logs_per_tx: rng.gen_range(0..=3),
        post_outage_cap: rng.gen_range(1..=3),
        forced_bloom_fp: rng.gen_bool(0.1),
        ..ScenarioConfig::default()
    };
    let span = cfg.range_span_l1_blocks();
    if rng.gen_bool(0.3) {
        cfg.outage_windows = vec![(rng.gen_range(1..=span), rng.gen_range(1..=span / 2 + 1))];
    }
    let start = rng.gen_range(1..=span / 2 + 1);
    let end = (start + rng.gen_range(0..span)).min(start + 399);
    (cfg, start, end)
}

/// Runs both pipelines on each seed's scenario and returns how many matched.
/// Stops at the first disagreement.
pub fn run_equivalence(seeds: impl IntoIterator<Item = u64>, weights: CostWeights) -> Result<usize, ExperimentError> {
    let mut count = 0;
    for seed in seeds {
        let (cfg, start, end) = equivalence_scenario(seed);
        let chain = build_chain_with_length(&cfg, end + cfg.channel_timeout_blocks() + 1)?;
        compare_range(&chain, &cfg, weights, start, end)?;
        count += 1;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn light() -> ScenarioConfig {
        ScenarioConfig { noise_txs_per_block: 4, ..ScenarioConfig::default() }
    }

    #[test]
    fn single_timeout_gives_one_row() {
        let r = run_experiment_1(&light(), CostWeights::default(), &[100]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].label, "100s");
        assert_eq!(r.rows[0].l1_blocks, 67 + 9);
        assert!(run_experiment_1(&light(), CostWeights::default(), &[]).is_err());
    }

    #[test]
    fn csv_diffs_are_recomputed() {
        let row = ExperimentRow {
            label: "x".into(),
            l1_blocks: 1,
            l1_txs: 2,
            baseline: CostLedger { total: 359, derivation: 200, receipt: 100 },
            optimized: CostLedger { total: 55, derivation: 100, receipt: 100 },
        };
        let csv = ExperimentResult { rows: vec![row] }.to_csv().unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "x,1,2,359,55,84.68,200,100,50.00,100,100,0.00");
    }

    #[test]
    fn forced_fp_equalizes_receipts() {
        let r = run_experiment_2(&light(), CostWeights::default(), &[50, 200]).unwrap();
        for row in &r.rows {
            assert_eq!(row.baseline.receipt, row.optimized.receipt);
            assert_eq!(row.diff(Metric::Receipt).unwrap(), 0.0);
        }
    }

    #[test]
    fn short_outage_series_shape() {
        let cfg = ScenarioConfig { noise_txs_per_block: 4, range_l2_blocks: 60, ..ScenarioConfig::default() };
        let s = run_experiment_3(&cfg, CostWeights::default(), 40).unwrap();
        assert!(s.points.windows(2).all(|w| w[1].l1_start == w[0].l1_end + 1));
        assert!(s.points.iter().all(|p| p.optimized_total <= p.baseline_total));
        assert!(s.plot_data(PipelineMode::Baseline).lines().count() == s.points.len() + 1);
    }

    #[test]
    fn equivalence_scenarios_are_bounded_and_agree() {
        for seed in 0..20 {
            let (cfg, start, end) = equivalence_scenario(seed);
            assert!(start >= 1 && end >= start && end - start < 400, "{seed}");
            assert_eq!(cfg.batcher_schedule.len(), 1);
        }
        assert_eq!(run_equivalence(0..20, CostWeights::default()).unwrap(), 20);
    }

    #[test]
    fn zero_length_outage_is_flat() {
        let s = run_experiment_3(&light(), CostWeights::default(), 0).unwrap();
        assert_eq!(s.elevated_ranges(), 0);
        let totals: Vec<u64> = s.points[1..].iter().map(|p| p.baseline_total).collect();
        let (lo, hi) = (*totals.iter().min().unwrap() as f64, *totals.iter().max().unwrap() as f64);
        assert!(hi / lo < 1.05, "{totals:?}");
    }
}
