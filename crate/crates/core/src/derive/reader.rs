use std::collections::BTreeSet;

use super::DeriveError;
use crate::cost::{Charge, CostLedger, CostWeights};
use crate::l1::{Chain, L1Block, L1Error, Receipt};

/// Metered, memoizing view of the chain for one derivation run.
///
/// A header is charged the first time it is fetched and is checked against
/// its hash. Receipts are charged per log the first time a block's receipts
/// are fetched.
#[derive(Debug)]
pub struct L1Reader<'a> {
    chain: &'a Chain,
    weights: CostWeights,
    ledger: CostLedger,
    headers: BTreeSet<u64>,
    receipts: BTreeSet<u64>,
}

impl<'a> L1Reader<'a> {
    pub fn new(chain: &'a Chain, weights: CostWeights) -> Self {
        Self { chain, weights, ledger: CostLedger::default(), headers: BTreeSet::new(), receipts: BTreeSet::new() }
    }

    pub fn chain(&self) -> &'a Chain {
        self.chain
    }

    pub fn header(&mut self, n: u64) -> Result<&'a L1Block, DeriveError> {
        let block = self.chain.block_by_number(n)?;
        if self.headers.insert(n) {
            self.ledger.charge(Charge::Header, &self.weights);
            if block.compute_hash() != block.hash {
                return Err(L1Error::HeaderHashMismatch(n).into());
            }
        }
        Ok(block)
    }

    pub fn receipts(&mut self, n: u64) -> Result<&'a [Receipt], DeriveError> {
        let block = self.header(n)?;
        let receipts = self.chain.receipts_by_hash(&block.hash)?;
        if self.receipts.insert(n) {
            self.ledger.charge(Charge::ReceiptLog(block.log_count()), &self.weights);
        }
        Ok(receipts)
    }

    pub fn has_receipts(&self, n: u64) -> bool {
        self.receipts.contains(&n)
    }

    pub fn charge(&mut self, kind: Charge) {
        self.ledger.charge(kind, &self.weights);
    }

    pub fn ledger(&self) -> CostLedger {
        self.ledger
    }
}
