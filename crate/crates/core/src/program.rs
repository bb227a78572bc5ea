//! One range program run: wire the pipeline, derive, and check boundaries.

use crate::baseline::derive_range_baseline_with;
use crate::cost::CostWeights;
use crate::derive::{DeriveError, DerivationOutput, L1Reader};
use crate::l1::{Chain, ScenarioConfig, SystemConfig};
use crate::optimized::{
    derive_range_optimized_with, epilogue_check, verify_header_chain, wire_pipeline, BootInfo, NonceState,
    PipelineMode, PrefeedSet,
};

/// How the program picks its pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunPolicy {
    /// Optimized unless the batcher changes in range.
    #[default]
    Auto,
    /// Skip detection and run the full scan.
    ForceBaseline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeOutcome {
    pub mode: PipelineMode,
    pub output: DerivationOutput,
    /// Tracked nonce state; only the optimized pipeline tracks one.
    pub post: Option<NonceState>,
}

pub fn run_range(
    chain: &Chain,
    boot: &BootInfo,
    prefeed: &PrefeedSet,
    cfg: &ScenarioConfig,
    weights: CostWeights,
    policy: RunPolicy,
) -> Result<RangeOutcome, DeriveError> {
    let mut reader = L1Reader::new(chain, weights);
    let timeout = cfg.channel_timeout_blocks();
    let mode = match policy {
        RunPolicy::Auto => wire_pipeline(&mut reader, boot)?,
        RunPolicy::ForceBaseline => PipelineMode::Baseline,
    };
    match mode {
        PipelineMode::Optimized => {
            let (output, post) = derive_range_optimized_with(&mut reader, boot, prefeed, timeout)?;
            epilogue_check(&post, boot)?;
            Ok(RangeOutcome { mode, output, post: Some(post) })
        }
        PipelineMode::Baseline => {
            verify_header_chain(&mut reader, boot)?;
            let start = SystemConfig { batcher_address: boot.agreed_sender };
            let output = derive_range_baseline_with(&mut reader, boot.l1_start, boot.l1_end, start, timeout)?;
            Ok(RangeOutcome { mode, output, post: None })
        }
    }
}
