//! Desk-scale laboratory for rollup derivation: a synthetic L1 chain, a
//! full-scan baseline pipeline, a prefeed + nonce optimized pipeline, a cost
//! meter, proof-range bookkeeping, and attacks against all of it.

pub mod adversary;
pub mod baseline;
pub mod bloom;
pub mod cost;
pub mod derive;
pub mod experiments;
pub mod l1;
pub mod optimized;
pub mod primitives;
pub mod program;
pub mod proof;
