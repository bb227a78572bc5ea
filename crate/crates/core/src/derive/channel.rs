//! Frame buffering and channel completion.

use std::collections::BTreeMap;

use super::frame::{decode_batch_records, Frame};
use super::{DaElement, DeriveError, L1Reader};
use crate::cost::Charge;
use crate::primitives::ChannelId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub id: ChannelId,
    pub frames: BTreeMap<u16, Frame>,
    pub opened_at: u64,
    pub last_frame: Option<u16>,
}

impl Channel {
    fn new(id: ChannelId, opened_at: u64) -> Self {
        Self { id, frames: BTreeMap::new(), opened_at, last_frame: None }
    }

    /// Closing frame seen and every frame number up to it present.
    pub fn is_complete(&self) -> bool {
        self.last_frame.is_some_and(|last| (0..=last).all(|n| self.frames.contains_key(&n)))
    }

    fn add(&mut self, frame: Frame) {
        if self.frames.contains_key(&frame.frame_number) {
            return;
        }
        if self.last_frame.is_some_and(|last| frame.frame_number > last) {
            return;
        }
        if frame.is_last {
            self.last_frame = Some(frame.frame_number);
            self.frames.retain(|&n, _| n <= frame.frame_number);
        }
        self.frames.insert(frame.frame_number, frame);
    }

    fn payload(&self) -> Vec<u8> {
        self.frames.values().flat_map(|f| f.payload.iter().copied()).collect()
    }
}

/// Open channels keyed by id. Channels older than the timeout are dropped
/// when their next frame arrives.
#[derive(Debug, Clone)]
pub struct ChannelBank {
    timeout_blocks: u64,
    channels: BTreeMap<ChannelId, Channel>,
}

impl ChannelBank {
    pub fn new(timeout_blocks: u64) -> Self {
        Self { timeout_blocks, channels: BTreeMap::new() }
    }

    pub fn open_channels(&self) -> usize {
        self.channels.len()
    }

    /// Decodes one DA element and returns the batch records of every channel
    /// it completes. Charges one byte-decode unit per DA byte.
    pub fn ingest(&mut self, element: &DaElement, reader: &mut L1Reader<'_>) -> Result<Vec<Vec<u8>>, DeriveError> {
        reader.charge(Charge::ByteDecode(element.bytes.len() as u64));
        let at = element.source_block;
        let frames =
            Frame::parse_all(&element.bytes).map_err(|reason| DeriveError::MalformedFrame { block: at, reason })?;
        let mut out = Vec::new();
        for frame in frames {
            let id = frame.channel_id;
            if self.channels.get(&id).is_some_and(|c| at > c.opened_at + self.timeout_blocks) {
                self.channels.remove(&id);
            }
            let channel = self.channels.entry(id).or_insert_with(|| Channel::new(id, at));
            channel.add(frame);
            if channel.is_complete() {
                let channel = self.channels.remove(&id).expect("present");
                let records = decode_batch_records(&channel.payload())
                    .map_err(|reason| DeriveError::MalformedFrame { block: at, reason })?;
                out.extend(records);
            }
        }
        Ok(out)
    }
}

/// Feeds elements through a fresh bank, returning `(block, records)` for every
/// element that completed at least one channel.
/// Source L1 block and decoded batch records of a completed channel.
type CompletedChannel = (u64, Vec<Vec<u8>>);

pub fn assemble_channels(
    elements: &[DaElement],
    timeout_blocks: u64,
    reader: &mut L1Reader<'_>,
) -> Result<Vec<CompletedChannel>, DeriveError> {
    let mut bank = ChannelBank::new(timeout_blocks);
    let mut out = Vec::new();
    for element in elements {
        let records = bank.ingest(element, reader)?;
        if !records.is_empty() {
            out.push((element.source_block, records));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostWeights;
    use crate::derive::frame::{encode_batch_records, encode_tx_data, split_into_frames};
    use crate::derive::DaKind;
    use crate::l1::{ChainBuilder, SystemConfig};

    fn element(block: u64, frames: &[Frame]) -> DaElement {
        DaElement { kind: DaKind::Calldata, bytes: encode_tx_data(frames), source_block: block, source_tx_index: 0, blob_index: None }
    }

    fn records() -> Vec<Vec<u8>> {
        vec![b"block-1".to_vec(), b"block-2".to_vec(), b"block-3".to_vec()]
    }

    fn with_reader<T>(f: impl FnOnce(&mut L1Reader<'_>) -> T) -> T {
        let chain = ChainBuilder::new(SystemConfig { batcher_address: Default::default() }).finish();
        let mut reader = L1Reader::new(&chain, CostWeights::default());
        f(&mut reader)
    }

    #[test]
    fn single_frame_channel_emits_immediately() {
        let payload = encode_batch_records(&records());
        let frames = split_into_frames(ChannelId([1; 16]), &payload, 1000);
        let out = with_reader(|r| assemble_channels(&[element(5, &frames)], 1, r)).unwrap();
        assert_eq!(out, vec![(5, records())]);
    }

    #[test]
    fn split_channel_emits_at_second_block() {
        let payload = encode_batch_records(&records());
        let frames = split_into_frames(ChannelId([2; 16]), &payload, 20);
        assert_eq!(frames.len(), 2);
        let elements = [element(7, &frames[..1]), element(8, &frames[1..])];
        let out = with_reader(|r| assemble_channels(&elements, 3, r)).unwrap();
        assert_eq!(out, vec![(8, records())]);
    }

    #[test]
    fn frames_out_of_order_still_complete() {
        let payload = encode_batch_records(&records());
        let frames = split_into_frames(ChannelId([3; 16]), &payload, 10);
        let mut reversed = frames.clone();
        reversed.reverse();
        let elements: Vec<_> = reversed.iter().map(|f| element(9, std::slice::from_ref(f))).collect();
        let out = with_reader(|r| assemble_channels(&elements, 1, r)).unwrap();
        assert_eq!(out, vec![(9, records())]);
    }

    #[test]
    fn timed_out_channel_is_dropped() {
        let payload = encode_batch_records(&records());
        let frames = split_into_frames(ChannelId([4; 16]), &payload, 20);
        let elements = [element(10, &frames[..1]), element(14, &frames[1..])];
        let out = with_reader(|r| assemble_channels(&elements, 3, r)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn duplicate_frames_are_ignored() {
        let payload = encode_batch_records(&records());
        let frames = split_into_frames(ChannelId([5; 16]), &payload, 20);
        let elements = [element(1, &frames[..1]), element(1, &frames[..1]), element(2, &frames[1..])];
        let out = with_reader(|r| assemble_channels(&elements, 3, r)).unwrap();
        assert_eq!(out, vec![(2, records())]);
    }

    #[test]
    fn byte_decode_is_charged_per_byte() {
        let payload = encode_batch_records(&records());
        let frames = split_into_frames(ChannelId([6; 16]), &payload, 1000);
        let e = element(1, &frames);
        let ledger = with_reader(|r| {
            assemble_channels(std::slice::from_ref(&e), 1, r).unwrap();
            r.ledger()
        });
        assert_eq!(ledger.derivation, e.bytes.len() as u64);
    }

    #[test]
    fn malformed_bytes_error() {
        let bad = DaElement { kind: DaKind::Calldata, bytes: vec![0, 1, 2], source_block: 3, source_tx_index: 0, blob_index: None };
        let err = with_reader(|r| assemble_channels(&[bad], 1, r)).unwrap_err();
        assert_eq!(err.code(), "MalformedFrame");
    }
}
