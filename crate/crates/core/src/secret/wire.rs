//! Simulated transport and its byte format.
//!
//! Each record is a little-endian `u32` body length followed by the body:
//!
//! ```text
//! round      u32
//! client_id  u32
//! kind       u8    1 = WEIGHTS, 2 = COUNTS, 3 = METRIC
//! scale      u8    fractional bits of the fixed-point payload
//! words      u64 × n
//! ```

use serde::{Deserialize, Serialize};

use super::RingElem;
use crate::error::{Error, Result};

const HEADER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayloadKind {
    Weights = 1,
    Counts = 2,
    Metric = 3,
}

impl PayloadKind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(PayloadKind::Weights),
            2 => Ok(PayloadKind::Counts),
            3 => Ok(PayloadKind::Metric),
            _ => Err(Error::Protocol(format!("unknown payload kind {b}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub round: u32,
    pub client_id: u32,
    pub kind: PayloadKind,
    pub scale: u8,
    pub words: Vec<RingElem>,
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let body = HEADER + 8 * self.words.len();
        let mut out = Vec::with_capacity(4 + body);
        out.extend_from_slice(&(body as u32).to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.client_id.to_le_bytes());
        out.push(self.kind as u8);
        out.push(self.scale);
        for w in &self.words {
            out.extend_from_slice(&w.0.to_le_bytes());
        }
        out
    }

    /// Decodes one record, returning it and the number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Message, usize)> {
        let truncated = || Error::Protocol("truncated record".into());
        let prefix: [u8; 4] = bytes.get(..4).ok_or_else(truncated)?.try_into().unwrap();
        let body_len = u32::from_le_bytes(prefix) as usize;
        let body = bytes.get(4..4 + body_len).ok_or_else(truncated)?;
        if body_len < HEADER || (body_len - HEADER) % 8 != 0 {
            return Err(Error::Protocol(format!("bad record length {body_len}")));
        }
        let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().unwrap());
        let words = body[HEADER..]
            .chunks_exact(8)
            .map(|c| RingElem(u64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let msg = Message {
            round: u32_at(0),
            client_id: u32_at(4),
            kind: PayloadKind::from_byte(body[8])?,
            scale: body[9],
            words,
        };
        Ok((msg, 4 + body_len))
    }
}

/// Receiver of a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Client(u32),
    Server,
}

/// Header of a delivered message, kept for inspection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub to: Endpoint,
    pub round: u32,
    pub client_id: u32,
    pub kind: PayloadKind,
    pub scale: u8,
    pub len: usize,
}

/// In-process transport. Every message goes through the byte format and is
/// logged; share generation is counted separately.
#[derive(Debug, Default, Clone)]
pub struct Transport {
    log: Vec<Envelope>,
    bytes: usize,
    shares: usize,
}

impl Transport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, to: Endpoint, msg: &Message) -> Result<Message> {
        let wire = msg.encode();
        let (got, used) = Message::decode(&wire)?;
        debug_assert_eq!(used, wire.len());
        self.bytes += wire.len();
        self.log.push(Envelope {
            to,
            round: got.round,
            client_id: got.client_id,
            kind: got.kind,
            scale: got.scale,
            len: got.words.len(),
        });
        Ok(got)
    }

    pub fn note_shares(&mut self, n: usize) {
        self.shares += n;
    }

    pub fn envelopes(&self) -> &[Envelope] {
        &self.log
    }

    pub fn message_count(&self) -> usize {
        self.log.len()
    }

    pub fn bytes_sent(&self) -> usize {
        self.bytes
    }

    pub fn shares_generated(&self) -> usize {
        self.shares
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let m = Message {
            round: 7,
            client_id: 1,
            kind: PayloadKind::Counts,
            scale: 20,
            words: vec![RingElem(1), RingElem(u64::MAX)],
        };
        let b = m.encode();
        assert_eq!(&b[..4], &26u32.to_le_bytes());
        assert_eq!(&b[4..8], &[7, 0, 0, 0]);
        assert_eq!(&b[8..12], &[1, 0, 0, 0]);
        assert_eq!(b[12], 2);
        assert_eq!(b[13], 20);
        assert_eq!(&b[14..22], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[22..30], &[0xff; 8]);
    }

    #[test]
    fn malformed_records() {
        assert!(Message::decode(&[1, 0]).is_err());
        assert!(Message::decode(&[3, 0, 0, 0, 0, 0, 0]).is_err());
        let mut b = Message {
            round: 0,
            client_id: 0,
            kind: PayloadKind::Metric,
            scale: 0,
            words: vec![],
        }
        .encode();
        b[12] = 9;
        assert!(matches!(Message::decode(&b), Err(Error::Protocol(_))));
    }

    #[test]
    fn transport_counts() {
        let mut t = Transport::new();
        let m = Message {
            round: 1,
            client_id: 0,
            kind: PayloadKind::Weights,
            scale: 20,
            words: vec![RingElem(3); 5],
        };
        assert_eq!(t.send(Endpoint::Server, &m).unwrap(), m);
        t.note_shares(4);
        assert_eq!(t.message_count(), 1);
        assert_eq!(t.bytes_sent(), 4 + 10 + 40);
        assert_eq!(t.shares_generated(), 4);
        assert_eq!(t.envelopes()[0].len, 5);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(
            round in any::<u32>(), id in any::<u32>(), k in 1u8..4, scale in any::<u8>(),
            words in prop::collection::vec(any::<u64>(), 0..40),
        ) {
            let m = Message {
                round, client_id: id, kind: PayloadKind::from_byte(k).unwrap(), scale,
                words: words.into_iter().map(RingElem).collect(),
            };
            let b = m.encode();
            let (got, used) = Message::decode(&b).unwrap();
            prop_assert_eq!(used, b.len());
            prop_assert_eq!(got, m);
        }
    }
}
