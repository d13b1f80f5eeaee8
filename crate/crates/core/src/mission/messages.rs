//! Wire messages of the mission and their stream bindings.

use crate::msgcodec::cbor::head_len;
use crate::msgcodec::{
    decode_payload, deframe, encode_message, frame_overhead, CodecError, MessageSchema, MessageValue, StreamRegistry,
    StreamType,
};

pub const TRIGGER_TOPIC: &str = "buoy/trigger";
pub const REPOS_TOPIC: &str = "leader/repos_cmd";
pub const DATA_TOPIC: &str = "follower/data";

const DEFAULT_REGISTRY: &str = include_str!("../../fixtures/registry.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MissionMessage {
    Trigger {
        run_id: u64,
    },
    /// Commanded depth in decimetres.
    RepositionCmd {
        depth_dm: u64,
    },
    Data {
        seq: u64,
        pad: Vec<u8>,
    },
}

impl MissionMessage {
    /// Quantizes a depth to decimetres, rounding halves up.
    pub fn reposition(depth_m: f64) -> Self {
        MissionMessage::RepositionCmd {
            depth_dm: (depth_m * 10.0 + 0.5).floor().max(0.0) as u64,
        }
    }

    pub fn topic(&self) -> &'static str {
        match self {
            MissionMessage::Trigger { .. } => TRIGGER_TOPIC,
            MissionMessage::RepositionCmd { .. } => REPOS_TOPIC,
            MissionMessage::Data { .. } => DATA_TOPIC,
        }
    }

    pub fn depth_m(&self) -> Option<f64> {
        match self {
            MissionMessage::RepositionCmd { depth_dm } => Some(*depth_dm as f64 / 10.0),
            _ => None,
        }
    }
}

/// Schemas plus the registry that binds them to stream ids.
#[derive(Debug, Clone)]
pub struct MessageDefs {
    pub registry: StreamRegistry,
    pub trigger: MessageSchema,
    pub reposition: MessageSchema,
    pub data: MessageSchema,
    pub packet_payload_bytes: usize,
}

/// Message schemas bound to the default registry (ids 1, 2, 3).
pub fn message_defs(packet_payload_bytes: usize) -> MessageDefs {
    let registry = StreamRegistry::from_json(DEFAULT_REGISTRY).expect("built-in registry is valid");
    MessageDefs::with_registry(registry, packet_payload_bytes)
}

/// Length of the `pad` field that makes a data frame exactly `frame_bytes`
/// long for sequence number `seq`.
pub fn data_pad_len(seq: u64, frame_bytes: usize) -> Result<usize, String> {
    let cbor_budget = frame_bytes
        .checked_sub(frame_overhead(StreamType::PublisherMsg))
        .ok_or_else(|| format!("{frame_bytes} bytes cannot hold the frame header"))?;
    if cbor_budget > 255 {
        return Err(format!(
            "{frame_bytes} bytes exceeds the 255-byte payload limit plus header"
        ));
    }
    let fixed = head_len(seq);
    (0..=cbor_budget)
        .rev()
        .find(|&pad| fixed + head_len(pad as u64) + pad == cbor_budget)
        .ok_or_else(|| format!("no pad length fits seq {seq} into {frame_bytes} bytes"))
}

impl MessageDefs {
    pub fn with_registry(registry: StreamRegistry, packet_payload_bytes: usize) -> Self {
        Self {
            registry,
            trigger: MessageSchema::structure([("run_id", MessageSchema::UInt)]),
            reposition: MessageSchema::structure([("depth_dm", MessageSchema::UInt)]),
            data: MessageSchema::structure([("seq", MessageSchema::UInt), ("pad", MessageSchema::Bytes)]),
            packet_payload_bytes,
        }
    }

    pub fn data_message(&self, seq: u64) -> Result<MissionMessage, String> {
        let pad_len = data_pad_len(seq, self.packet_payload_bytes)?;
        Ok(MissionMessage::Data {
            seq,
            pad: vec![0u8; pad_len],
        })
    }

    pub fn encode(&self, msg: &MissionMessage) -> Result<Vec<u8>, CodecError> {
        let (value, schema) = match msg {
            MissionMessage::Trigger { run_id } => {
                (MessageValue::Struct(vec![MessageValue::UInt(*run_id)]), &self.trigger)
            }
            MissionMessage::RepositionCmd { depth_dm } => (
                MessageValue::Struct(vec![MessageValue::UInt(*depth_dm)]),
                &self.reposition,
            ),
            MissionMessage::Data { seq, pad } => (
                MessageValue::Struct(vec![MessageValue::UInt(*seq), MessageValue::Bytes(pad.clone())]),
                &self.data,
            ),
        };
        encode_message(&self.registry, msg.topic(), &value, schema)
    }

    /// Deframes `bytes` and decodes every packet found. Individual packet
    /// failures are returned alongside the successes.
    pub fn decode(&self, bytes: &[u8]) -> (Vec<MissionMessage>, Vec<CodecError>, usize) {
        let deframed = deframe(bytes);
        let mut ok = Vec::new();
        let mut errors = Vec::new();
        for packet in &deframed.packets {
            match self.decode_packet(packet) {
                Ok(m) => ok.push(m),
                Err(e) => errors.push(e),
            }
        }
        (ok, errors, deframed.skipped)
    }

    fn decode_packet(&self, packet: &crate::msgcodec::Packet) -> Result<MissionMessage, CodecError> {
        let topic = self.registry.reverse(packet.stream_id)?;
        let field = |v: &MessageValue, i: usize| match v {
            MessageValue::Struct(m) => m.get(i).cloned(),
            _ => None,
        };
        let uint = |v: Option<MessageValue>| match v {
            Some(MessageValue::UInt(n)) => n,
            _ => unreachable!("schema guarantees a uint"),
        };
        Ok(match topic {
            TRIGGER_TOPIC => {
                let v = decode_payload(packet, &self.trigger)?;
                MissionMessage::Trigger {
                    run_id: uint(field(&v, 0)),
                }
            }
            REPOS_TOPIC => {
                let v = decode_payload(packet, &self.reposition)?;
                MissionMessage::RepositionCmd {
                    depth_dm: uint(field(&v, 0)),
                }
            }
            DATA_TOPIC => {
                let v = decode_payload(packet, &self.data)?;
                let pad = match field(&v, 1) {
                    Some(MessageValue::Bytes(b)) => b,
                    _ => unreachable!("schema guarantees bytes"),
                };
                MissionMessage::Data {
                    seq: uint(field(&v, 0)),
                    pad,
                }
            }
            other => {
                return Err(CodecError::Registry(crate::msgcodec::RegistryError::UnknownStream(
                    other.to_owned(),
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_bindings() {
        let defs = message_defs(64);
        assert_eq!(defs.registry.lookup(TRIGGER_TOPIC).unwrap(), 1);
        assert_eq!(defs.registry.lookup(REPOS_TOPIC).unwrap(), 2);
        assert_eq!(defs.registry.lookup(DATA_TOPIC).unwrap(), 3);
    }

    #[test]
    fn reposition_quantization() {
        let m = MissionMessage::reposition(13.74);
        assert_eq!(m, MissionMessage::RepositionCmd { depth_dm: 137 });
        assert_eq!(m.depth_m(), Some(13.7));
        assert_eq!(
            MissionMessage::reposition(13.75),
            MissionMessage::RepositionCmd { depth_dm: 138 }
        );
        let defs = message_defs(64);
        let (msgs, errs, skipped) = defs.decode(&defs.encode(&m).unwrap());
        assert_eq!((msgs, errs.len(), skipped), (vec![m], 0, 0));
    }

    #[test]
    fn data_frames_are_exactly_the_configured_size() {
        // Header 5 bytes: A5, type, id, len, 5A. seq 0 takes 1 byte and the
        // pad header 2 bytes, leaving 56 pad bytes.
        assert_eq!(data_pad_len(0, 64).unwrap(), 56);
        assert_eq!(data_pad_len(24, 64).unwrap(), 55);
        let defs = message_defs(64);
        for seq in [0, 23, 24, 199, 255, 256, 70_000] {
            let m = defs.data_message(seq).unwrap();
            let bytes = defs.encode(&m).unwrap();
            assert_eq!(bytes.len(), 64, "seq {seq}");
            let (back, _, _) = defs.decode(&bytes);
            assert_eq!(back, vec![m]);
        }
        assert!(data_pad_len(0, 4).is_err());
        assert!(data_pad_len(0, 300).is_err());
    }

    #[test]
    fn trigger_round_trip() {
        let defs = message_defs(64);
        let m = MissionMessage::Trigger { run_id: 1 };
        let bytes = defs.encode(&m).unwrap();
        assert_eq!(bytes, [0xA5, 0x00, 0x01, 0x01, 0x01, 0x5A]);
        assert_eq!(defs.decode(&bytes).0, vec![m]);
    }

    #[test]
    fn unknown_or_malformed_packets_are_reported() {
        let defs = message_defs(64);
        // Stream id 9 is not registered.
        let (ok, errs, _) = defs.decode(&[0xA5, 0x00, 0x09, 0x01, 0x01, 0x5A]);
        assert!(ok.is_empty());
        assert_eq!(errs.len(), 1);
        // Reposition payload carrying text.
        let (ok, errs, _) = defs.decode(&[0xA5, 0x00, 0x02, 0x02, 0x61, 0x41, 0x5A]);
        assert!(ok.is_empty());
        assert_eq!(errs.len(), 1);
    }
}
