//! Frame wire format and batch-record packing.
//!
//! DA bytes of one batcher transaction:
//!
//! ```text
//! version:u8 = 0 | frame | frame | ...
//! frame = channel_id:[u8;16] | frame_number:u16 BE | is_last:u8 | len:u32 BE | payload
//! ```
//!
//! A channel payload is the concatenation of its frames' payloads and holds
//! `len:u32 BE | record` entries.

use crate::primitives::ChannelId;

pub const DERIVATION_VERSION_0: u8 = 0;
pub const FRAME_HEADER_LEN: usize = 16 + 2 + 1 + 4;
/// Per-transaction DA budget.
pub const MAX_TX_DATA: usize = 120 * 1024;
/// Largest frame payload that fits one transaction.
pub const MAX_FRAME_PAYLOAD: usize = MAX_TX_DATA - 1 - FRAME_HEADER_LEN;
/// DA larger than this goes into a blob.
pub const BLOB_THRESHOLD: usize = 4 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("empty DA payload")]
    Empty,
    #[error("unknown derivation version {0}")]
    Version(u8),
    #[error("truncated frame header at offset {0}")]
    TruncatedHeader(usize),
    #[error("frame payload length {len} overruns data at offset {offset}")]
    TruncatedPayload { offset: usize, len: usize },
    #[error("invalid is_last byte {0}")]
    IsLast(u8),
    #[error("truncated batch record at offset {0}")]
    TruncatedRecord(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub channel_id: ChannelId,
    pub frame_number: u16,
    pub is_last: bool,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.channel_id.as_bytes());
        out.extend_from_slice(&self.frame_number.to_be_bytes());
        out.push(self.is_last as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses all frames from the DA bytes of one transaction.
    pub fn parse_all(data: &[u8]) -> Result<Vec<Frame>, FrameError> {
        let (&version, mut rest) = data.split_first().ok_or(FrameError::Empty)?;
        if version != DERIVATION_VERSION_0 {
            return Err(FrameError::Version(version));
        }
        let mut offset = 1;
        let mut frames = Vec::new();
        while !rest.is_empty() {
            if rest.len() < FRAME_HEADER_LEN {
                return Err(FrameError::TruncatedHeader(offset));
            }
            let channel_id = ChannelId::from_slice(&rest[..16]).expect("16 bytes");
            let frame_number = u16::from_be_bytes([rest[16], rest[17]]);
            let is_last = match rest[18] {
                0 => false,
                1 => true,
                other => return Err(FrameError::IsLast(other)),
            };
            let len = u32::from_be_bytes(rest[19..23].try_into().expect("4 bytes")) as usize;
            let body = &rest[FRAME_HEADER_LEN..];
            if body.len() < len {
                return Err(FrameError::TruncatedPayload { offset, len });
            }
            frames.push(Frame { channel_id, frame_number, is_last, payload: body[..len].to_vec() });
            rest = &body[len..];
            offset += FRAME_HEADER_LEN + len;
        }
        Ok(frames)
    }
}

/// Version byte followed by the encoded frames.
pub fn encode_tx_data(frames: &[Frame]) -> Vec<u8> {
    let mut out = vec![DERIVATION_VERSION_0];
    for f in frames {
        f.encode_into(&mut out);
    }
    out
}

/// Splits a channel payload into frames of at most `max_payload` bytes.
pub fn split_into_frames(id: ChannelId, payload: &[u8], max_payload: usize) -> Vec<Frame> {
    let chunks: Vec<&[u8]> = if payload.is_empty() { vec![&[][..]] } else { payload.chunks(max_payload).collect() };
    let last = chunks.len() - 1;
    chunks
        .into_iter()
        .enumerate()
        .map(|(i, chunk)| Frame { channel_id: id, frame_number: i as u16, is_last: i == last, payload: chunk.to_vec() })
        .collect()
}

pub fn encode_batch_records(records: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.iter().map(|r| r.len() + 4).sum());
    for r in records {
        out.extend_from_slice(&(r.len() as u32).to_be_bytes());
        out.extend_from_slice(r);
    }
    out
}

pub fn decode_batch_records(payload: &[u8]) -> Result<Vec<Vec<u8>>, FrameError> {
    let mut records = Vec::new();
    let mut offset = 0;
    while offset < payload.len() {
        let header = payload.get(offset..offset + 4).ok_or(FrameError::TruncatedRecord(offset))?;
        let len = u32::from_be_bytes(header.try_into().expect("4 bytes")) as usize;
        let body = payload.get(offset + 4..offset + 4 + len).ok_or(FrameError::TruncatedRecord(offset))?;
        records.push(body.to_vec());
        offset += 4 + len;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(b: u8) -> ChannelId {
        ChannelId([b; 16])
    }

    #[test]
    fn frames_parse_back() {
        let frames = split_into_frames(id(1), &[7u8; 50], 20);
        assert_eq!(frames.len(), 3);
        assert!(frames[2].is_last && !frames[1].is_last);
        let data = encode_tx_data(&frames);
        assert_eq!(Frame::parse_all(&data).unwrap(), frames);
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(Frame::parse_all(&[]), Err(FrameError::Empty));
        assert_eq!(Frame::parse_all(&[1, 2, 3]), Err(FrameError::Version(1)));
        assert_eq!(Frame::parse_all(&[0, 1, 2]), Err(FrameError::TruncatedHeader(1)));

        let mut data = encode_tx_data(&split_into_frames(id(2), b"abcdef", 100));
        data.truncate(data.len() - 2);
        assert!(matches!(Frame::parse_all(&data), Err(FrameError::TruncatedPayload { .. })));

        let mut bad_flag = encode_tx_data(&split_into_frames(id(2), b"x", 100));
        bad_flag[1 + 18] = 9;
        assert_eq!(Frame::parse_all(&bad_flag), Err(FrameError::IsLast(9)));
    }

    #[test]
    fn records_round_trip_and_truncation() {
        let records = vec![b"one".to_vec(), vec![], b"three".to_vec()];
        let packed = encode_batch_records(&records);
        assert_eq!(decode_batch_records(&packed).unwrap(), records);
        assert!(decode_batch_records(&packed[..packed.len() - 1]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_then_concat_restores_payload(
            payload in proptest::collection::vec(proptest::num::u8::ANY, 0..400),
            max in 1usize..64,
        ) {
            let frames = split_into_frames(id(3), &payload, max);
            let joined: Vec<u8> = frames.iter().flat_map(|f| f.payload.clone()).collect();
            proptest::prop_assert_eq!(joined, payload);
            proptest::prop_assert_eq!(frames.iter().filter(|f| f.is_last).count(), 1);
            let parsed = Frame::parse_all(&encode_tx_data(&frames)).unwrap();
            proptest::prop_assert_eq!(parsed, frames);
        }
    }
}
