//! Message data path: flattening, CBOR coding, framing and the stream
//! registry.

pub mod cbor;
pub mod flatten;
pub mod frame;
pub mod registry;

pub use cbor::{decode_value, decode_values, encode_value, encode_values, CborError, FieldValue};
pub use flatten::{flatten, unflatten, Field, FlattenError, MessageSchema, MessageValue};
pub use frame::{deframe, frame, frame_overhead, Deframed, FrameError, Packet, StreamType};
pub use registry::{RegistryError, StreamKind, StreamRegistry};

use thiserror::Error;

/// Any failure along the message path, in either direction.
#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Cbor(#[from] CborError),
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Flattens and encodes `msg` into a publisher frame on `topic`.
pub fn encode_message(
    registry: &StreamRegistry,
    topic: &str,
    msg: &MessageValue,
    schema: &MessageSchema,
) -> Result<Vec<u8>, CodecError> {
    let id = registry.lookup(topic)?;
    let payload = encode_values(&flatten(msg, schema)?);
    Ok(frame(&Packet::publish(id, payload))?)
}

/// Decodes the payload of one deframed packet under `schema`.
pub fn decode_payload(packet: &Packet, schema: &MessageSchema) -> Result<MessageValue, CodecError> {
    let values = decode_values(&packet.payload)?;
    Ok(unflatten(&values, schema)?)
}
