//! Packet framing: `START | type | id | [req_seq] | len | payload | END`.
//!
//! There is no byte stuffing. The length byte alone delimits the payload and
//! the deframer resynchronizes one byte at a time when a candidate frame does
//! not validate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const START: u8 = 0xA5;
pub const END: u8 = 0x5A;
pub const MAX_PAYLOAD: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamType {
    PublisherMsg,
    ClientRequest,
    ServiceResponse,
}

impl StreamType {
    pub fn byte(self) -> u8 {
        match self {
            StreamType::PublisherMsg => 0x00,
            StreamType::ClientRequest => 0x01,
            StreamType::ServiceResponse => 0x02,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x00 => Some(StreamType::PublisherMsg),
            0x01 => Some(StreamType::ClientRequest),
            0x02 => Some(StreamType::ServiceResponse),
            _ => None,
        }
    }

    fn has_req_seq(self) -> bool {
        self != StreamType::PublisherMsg
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub stream_type: StreamType,
    pub stream_id: u8,
    /// Request/response correlation; ignored for publisher messages.
    pub req_seq: u8,
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn publish(stream_id: u8, payload: Vec<u8>) -> Self {
        Self {
            stream_type: StreamType::PublisherMsg,
            stream_id,
            req_seq: 0,
            payload,
        }
    }

    pub fn request(stream_id: u8, req_seq: u8, payload: Vec<u8>) -> Self {
        Self {
            stream_type: StreamType::ClientRequest,
            stream_id,
            req_seq,
            payload,
        }
    }

    pub fn response(stream_id: u8, req_seq: u8, payload: Vec<u8>) -> Self {
        Self {
            stream_type: StreamType::ServiceResponse,
            stream_id,
            req_seq,
            payload,
        }
    }
}

/// Bytes a frame adds around its payload.
pub fn frame_overhead(stream_type: StreamType) -> usize {
    if stream_type.has_req_seq() {
        6
    } else {
        5
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds the 255-byte frame limit")]
    PayloadTooLong(usize),
}

pub fn frame(p: &Packet) -> Result<Vec<u8>, FrameError> {
    if p.payload.len() > MAX_PAYLOAD {
        return Err(FrameError::PayloadTooLong(p.payload.len()));
    }
    let mut out = Vec::with_capacity(p.payload.len() + frame_overhead(p.stream_type));
    out.push(START);
    out.push(p.stream_type.byte());
    out.push(p.stream_id);
    if p.stream_type.has_req_seq() {
        out.push(p.req_seq);
    }
    out.push(p.payload.len() as u8);
    out.extend_from_slice(&p.payload);
    out.push(END);
    Ok(out)
}

/// Packets recovered from a byte stream plus the number of bytes that did not
/// belong to any of them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Deframed {
    pub packets: Vec<Packet>,
    pub skipped: usize,
}

/// Tries to parse a frame starting at `at`; returns it with its total length.
fn parse_at(stream: &[u8], at: usize) -> Option<(Packet, usize)> {
    let rest = &stream[at..];
    if rest.first() != Some(&START) {
        return None;
    }
    let stream_type = StreamType::from_byte(*rest.get(1)?)?;
    let stream_id = *rest.get(2)?;
    let (req_seq, len_at) = if stream_type.has_req_seq() {
        (*rest.get(3)?, 4)
    } else {
        (0, 3)
    };
    let len = *rest.get(len_at)? as usize;
    let payload_at = len_at + 1;
    let end_at = payload_at + len;
    if *rest.get(end_at)? != END {
        return None;
    }
    let packet = Packet {
        stream_type,
        stream_id,
        req_seq,
        payload: rest[payload_at..end_at].to_vec(),
    };
    Some((packet, end_at + 1))
}

pub fn deframe(stream: &[u8]) -> Deframed {
    let mut out = Deframed::default();
    let mut at = 0;
    while at < stream.len() {
        match parse_at(stream, at) {
            Some((packet, len)) => {
                out.packets.push(packet);
                at += len;
            }
            None => {
                out.skipped += 1;
                at += 1;
            }
        }
    }
    out
}
