//! CBOR subset used on the wire: unsigned and negative integers, byte and
//! text strings, definite-length arrays, booleans and floats.
//!
//! Encoding always picks the shortest legal form. Integers use the smallest
//! argument width, floats the narrowest IEEE-754 width that reproduces the
//! binary64 value bit for bit.

use std::fmt;

use thiserror::Error;

const MAJOR_UINT: u8 = 0;
const MAJOR_NINT: u8 = 1;
const MAJOR_BYTES: u8 = 2;
const MAJOR_TEXT: u8 = 3;
const MAJOR_ARRAY: u8 = 4;
const MAJOR_MAP: u8 = 5;
const MAJOR_TAG: u8 = 6;
const MAJOR_SIMPLE: u8 = 7;

const FALSE: u8 = 0xF4;
const TRUE: u8 = 0xF5;
const HALF: u8 = 0xF9;
const SINGLE: u8 = 0xFA;
const DOUBLE: u8 = 0xFB;

/// Canonical half-precision quiet NaN.
pub const CANONICAL_NAN: [u8; 3] = [HALF, 0x7E, 0x00];

/// Arrays nested deeper than this are rejected by the decoder.
pub const MAX_DEPTH: usize = 64;

/// A primitive value produced by flattening, or a nested list of them.
#[derive(Debug, Clone)]
pub enum FieldValue {
    UInt(u64),
    /// Negative integer stored as its CBOR argument: the value is `-1 - n`.
    NInt(u64),
    Bool(bool),
    Float(f64),
    Text(String),
    Bytes(Vec<u8>),
    Seq(Vec<FieldValue>),
}

impl FieldValue {
    /// Builds the integer variant matching the sign of `v`.
    pub fn int(v: i64) -> Self {
        if v >= 0 {
            FieldValue::UInt(v as u64)
        } else {
            FieldValue::NInt(!(v as u64))
        }
    }

    /// The value as an `i128`, for either integer variant.
    pub fn as_i128(&self) -> Option<i128> {
        match *self {
            FieldValue::UInt(n) => Some(n as i128),
            FieldValue::NInt(n) => Some(-1 - n as i128),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FieldValue::UInt(_) => "uint",
            FieldValue::NInt(_) => "nint",
            FieldValue::Bool(_) => "bool",
            FieldValue::Float(_) => "float",
            FieldValue::Text(_) => "text",
            FieldValue::Bytes(_) => "bytes",
            FieldValue::Seq(_) => "seq",
        }
    }
}

// Floats compare by bit pattern so that -0.0 and 0.0 stay distinct; any two
// NaNs compare equal because the encoder canonicalizes them.
impl PartialEq for FieldValue {
    fn eq(&self, other: &Self) -> bool {
        use FieldValue::*;
        match (self, other) {
            (UInt(a), UInt(b)) => a == b,
            (NInt(a), NInt(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            (Text(a), Text(b)) => a == b,
            (Bytes(a), Bytes(b)) => a == b,
            (Seq(a), Seq(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::UInt(n) => write!(f, "{n}"),
            FieldValue::NInt(n) => write!(f, "{}", -1 - *n as i128),
            FieldValue::Bool(b) => write!(f, "{b}"),
            FieldValue::Float(x) => write!(f, "{x}"),
            FieldValue::Text(s) => write!(f, "{s:?}"),
            FieldValue::Bytes(b) => write!(f, "h'{}'", hex(b)),
            FieldValue::Seq(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CborError {
    #[error("data item at offset {offset} extends past the end of the buffer")]
    Truncated { offset: usize },
    #[error("major type {major} at offset {offset} is outside the supported subset")]
    UnsupportedMajorType { major: u8, offset: usize },
    #[error("unsupported simple value or encoding 0x{byte:02x} at offset {offset}")]
    UnsupportedValue { byte: u8, offset: usize },
    #[error("text string at offset {offset} is not valid UTF-8")]
    MalformedUtf8 { offset: usize },
    #[error("arrays nested deeper than {MAX_DEPTH} levels")]
    TooDeep,
    #[error("cursor {cursor} is past the end of a {len}-byte buffer")]
    CursorOutOfRange { cursor: usize, len: usize },
}

fn write_head(out: &mut Vec<u8>, major: u8, arg: u64) {
    let m = major << 5;
    if arg < 24 {
        out.push(m | arg as u8);
    } else if arg <= u8::MAX as u64 {
        out.extend_from_slice(&[m | 24, arg as u8]);
    } else if arg <= u16::MAX as u64 {
        out.push(m | 25);
        out.extend_from_slice(&(arg as u16).to_be_bytes());
    } else if arg <= u32::MAX as u64 {
        out.push(m | 26);
        out.extend_from_slice(&(arg as u32).to_be_bytes());
    } else {
        out.push(m | 27);
        out.extend_from_slice(&arg.to_be_bytes());
    }
}

/// Encoded size of a head carrying `arg`.
pub fn head_len(arg: u64) -> usize {
    match arg {
        0..=23 => 1,
        24..=0xFF => 2,
        0x100..=0xFFFF => 3,
        0x1_0000..=0xFFFF_FFFF => 5,
        _ => 9,
    }
}

/// Half-precision bits for `v` if the conversion is exact.
pub fn f64_to_f16_exact(v: f64) -> Option<u16> {
    let sign: u16 = if v.is_sign_negative() { 0x8000 } else { 0 };
    if v.is_nan() {
        return None;
    }
    if v.is_infinite() {
        return Some(sign | 0x7C00);
    }
    let a = v.abs();
    if a == 0.0 {
        return Some(sign);
    }
    // Unbiased binary exponent of a normal binary64 value.
    let bits = a.to_bits();
    let raw_exp = ((bits >> 52) & 0x7FF) as i32;
    if raw_exp == 0 {
        // binary64 subnormals are far below the half range.
        return None;
    }
    let e = raw_exp - 1023;
    let candidate = if (-14..=15).contains(&e) {
        let scaled = a * 2f64.powi(10 - e) - 1024.0;
        if scaled.fract() != 0.0 || !(0.0..1024.0).contains(&scaled) {
            return None;
        }
        sign | (((e + 15) as u16) << 10) | scaled as u16
    } else if e < -14 {
        let scaled = a * 2f64.powi(24);
        if scaled.fract() != 0.0 || !(1.0..1024.0).contains(&scaled) {
            return None;
        }
        sign | scaled as u16
    } else {
        return None;
    };
    (f16_to_f64(candidate).to_bits() == v.to_bits()).then_some(candidate)
}

/// Widens half-precision bits to binary64.
pub fn f16_to_f64(h: u16) -> f64 {
    let sign = if h & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = ((h >> 10) & 0x1F) as i32;
    let mant = (h & 0x3FF) as f64;
    let mag = match exp {
        0 => mant * 2f64.powi(-24),
        31 => {
            if mant == 0.0 {
                f64::INFINITY
            } else {
                f64::NAN
            }
        }
        _ => (1.0 + mant / 1024.0) * 2f64.powi(exp - 15),
    };
    sign * mag
}

fn encode_float(out: &mut Vec<u8>, v: f64) {
    if v.is_nan() {
        out.extend_from_slice(&CANONICAL_NAN);
    } else if let Some(h) = f64_to_f16_exact(v) {
        out.push(HALF);
        out.extend_from_slice(&h.to_be_bytes());
    } else if (v as f32) as f64 == v {
        out.push(SINGLE);
        out.extend_from_slice(&(v as f32).to_bits().to_be_bytes());
    } else {
        out.push(DOUBLE);
        out.extend_from_slice(&v.to_bits().to_be_bytes());
    }
}

/// Appends the shortest encoding of `v` to `out`.
pub fn encode_into(out: &mut Vec<u8>, v: &FieldValue) {
    match v {
        FieldValue::UInt(n) => write_head(out, MAJOR_UINT, *n),
        FieldValue::NInt(n) => write_head(out, MAJOR_NINT, *n),
        FieldValue::Bool(b) => out.push(if *b { TRUE } else { FALSE }),
        FieldValue::Float(x) => encode_float(out, *x),
        FieldValue::Text(s) => {
            write_head(out, MAJOR_TEXT, s.len() as u64);
            out.extend_from_slice(s.as_bytes());
        }
        FieldValue::Bytes(b) => {
            write_head(out, MAJOR_BYTES, b.len() as u64);
            out.extend_from_slice(b);
        }
        FieldValue::Seq(items) => {
            write_head(out, MAJOR_ARRAY, items.len() as u64);
            for item in items {
                encode_into(out, item);
            }
        }
    }
}

pub fn encode_value(v: &FieldValue) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(&mut out, v);
    out
}

/// Encodes a list of values back to back, one data item each.
pub fn encode_values(values: &[FieldValue]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        encode_into(&mut out, v);
    }
    out
}

fn take(buf: &[u8], at: usize, n: usize, item: usize) -> Result<&[u8], CborError> {
    at.checked_add(n)
        .and_then(|end| buf.get(at..end))
        .ok_or(CborError::Truncated { offset: item })
}

fn read_arg(buf: &[u8], cursor: usize, info: u8) -> Result<(u64, usize), CborError> {
    let body = cursor + 1;
    let arg = match info {
        0..=23 => return Ok((info as u64, body)),
        24 => take(buf, body, 1, cursor)?[0] as u64,
        25 => u16::from_be_bytes(take(buf, body, 2, cursor)?.try_into().unwrap()) as u64,
        26 => u32::from_be_bytes(take(buf, body, 4, cursor)?.try_into().unwrap()) as u64,
        27 => u64::from_be_bytes(take(buf, body, 8, cursor)?.try_into().unwrap()),
        _ => {
            return Err(CborError::UnsupportedValue {
                byte: buf[cursor],
                offset: cursor,
            })
        }
    };
    let width = 1usize << (info - 24);
    Ok((arg, body + width))
}

fn decode_at(buf: &[u8], cursor: usize, depth: usize) -> Result<(FieldValue, usize), CborError> {
    if depth > MAX_DEPTH {
        return Err(CborError::TooDeep);
    }
    let initial = *buf.get(cursor).ok_or(CborError::Truncated { offset: cursor })?;
    let major = initial >> 5;
    let info = initial & 0x1F;
    match major {
        MAJOR_UINT => {
            let (n, next) = read_arg(buf, cursor, info)?;
            Ok((FieldValue::UInt(n), next))
        }
        MAJOR_NINT => {
            let (n, next) = read_arg(buf, cursor, info)?;
            Ok((FieldValue::NInt(n), next))
        }
        MAJOR_BYTES | MAJOR_TEXT => {
            let (len, start) = read_arg(buf, cursor, info)?;
            let len = usize::try_from(len).map_err(|_| CborError::Truncated { offset: cursor })?;
            let data = take(buf, start, len, cursor)?;
            let value = if major == MAJOR_BYTES {
                FieldValue::Bytes(data.to_vec())
            } else {
                let s = std::str::from_utf8(data).map_err(|_| CborError::MalformedUtf8 { offset: cursor })?;
                FieldValue::Text(s.to_owned())
            };
            Ok((value, start + len))
        }
        MAJOR_ARRAY => {
            let (count, mut next) = read_arg(buf, cursor, info)?;
            // Every element takes at least one byte.
            if count > (buf.len() - next.min(buf.len())) as u64 {
                return Err(CborError::Truncated { offset: cursor });
            }
            let mut items = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let (item, after) = decode_at(buf, next, depth + 1)?;
                items.push(item);
                next = after;
            }
            Ok((FieldValue::Seq(items), next))
        }
        MAJOR_MAP | MAJOR_TAG => Err(CborError::UnsupportedMajorType { major, offset: cursor }),
        MAJOR_SIMPLE => match initial {
            FALSE => Ok((FieldValue::Bool(false), cursor + 1)),
            TRUE => Ok((FieldValue::Bool(true), cursor + 1)),
            HALF => {
                let b = take(buf, cursor + 1, 2, cursor)?;
                let h = u16::from_be_bytes([b[0], b[1]]);
                Ok((FieldValue::Float(f16_to_f64(h)), cursor + 3))
            }
            SINGLE => {
                let b = take(buf, cursor + 1, 4, cursor)?;
                let x = f32::from_bits(u32::from_be_bytes(b.try_into().unwrap()));
                Ok((FieldValue::Float(x as f64), cursor + 5))
            }
            DOUBLE => {
                let b = take(buf, cursor + 1, 8, cursor)?;
                let x = f64::from_bits(u64::from_be_bytes(b.try_into().unwrap()));
                Ok((FieldValue::Float(x), cursor + 9))
            }
            _ => Err(CborError::UnsupportedValue {
                byte: initial,
                offset: cursor,
            }),
        },
        _ => unreachable!("major type is three bits"),
    }
}

/// Decodes exactly one data item starting at `cursor`, returning it with the
/// offset just past it.
pub fn decode_value(buf: &[u8], cursor: usize) -> Result<(FieldValue, usize), CborError> {
    if cursor >= buf.len() {
        return Err(CborError::CursorOutOfRange { cursor, len: buf.len() });
    }
    decode_at(buf, cursor, 0)
}

/// Decodes back-to-back data items until the buffer is exhausted.
pub fn decode_values(buf: &[u8]) -> Result<Vec<FieldValue>, CborError> {
    let mut values = Vec::new();
    let mut cursor = 0;
    while cursor < buf.len() {
        let (v, next) = decode_value(buf, cursor)?;
        values.push(v);
        cursor = next;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixture_values_encode_byte_exact() {
        assert_eq!(encode_value(&FieldValue::UInt(10)), [0x0A]);
        assert_eq!(encode_value(&FieldValue::int(-5)), [0x24]);
        assert_eq!(encode_value(&FieldValue::Text("abc".into())), [0x63, 0x61, 0x62, 0x63]);
        assert_eq!(encode_value(&FieldValue::Float(1.5)), [0xF9, 0x3E, 0x00]);
        assert_eq!(encode_value(&FieldValue::Bool(true)), [0xF5]);
        assert_eq!(encode_value(&FieldValue::UInt(0)), [0x00]);
    }

    #[test]
    fn integer_head_boundaries() {
        let cases: &[(u64, usize)] = &[
            (23, 1),
            (24, 2),
            (255, 2),
            (256, 3),
            (65535, 3),
            (65536, 5),
            (u32::MAX as u64, 5),
            (u32::MAX as u64 + 1, 9),
            (u64::MAX, 9),
        ];
        for &(n, len) in cases {
            assert_eq!(encode_value(&FieldValue::UInt(n)).len(), len, "uint {n}");
            assert_eq!(encode_value(&FieldValue::NInt(n)).len(), len, "nint {n}");
        }
    }

    #[test]
    fn float_width_selection() {
        // 0.1 needs binary64, 1/3 as f32 fits single, 65504 is max half.
        assert_eq!(encode_value(&FieldValue::Float(0.1))[0], DOUBLE);
        assert_eq!(encode_value(&FieldValue::Float((1.0f32 / 3.0) as f64))[0], SINGLE);
        assert_eq!(encode_value(&FieldValue::Float(65504.0)), [0xF9, 0x7B, 0xFF]);
        assert_eq!(encode_value(&FieldValue::Float(65520.0))[0], SINGLE);
        // Smallest half subnormal.
        assert_eq!(encode_value(&FieldValue::Float(2f64.powi(-24))), [0xF9, 0x00, 0x01]);
        assert_eq!(encode_value(&FieldValue::Float(-0.0)), [0xF9, 0x80, 0x00]);
        assert_eq!(encode_value(&FieldValue::Float(f64::NEG_INFINITY)), [0xF9, 0xFC, 0x00]);
        assert_eq!(encode_value(&FieldValue::Float(f64::NAN)), CANONICAL_NAN);
        let odd_nan = f64::from_bits(0x7FF0_0000_0000_0001);
        assert_eq!(encode_value(&FieldValue::Float(odd_nan)), CANONICAL_NAN);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            decode_value(&[0x19, 0x01, 0xF4], 0).unwrap(),
            (FieldValue::UInt(500), 3)
        );
        assert_eq!(decode_value(&[0x80], 0).unwrap(), (FieldValue::Seq(vec![]), 1));
        assert_eq!(decode_value(&[0x0A, 0x24], 1).unwrap(), (FieldValue::int(-5), 2));
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(
            decode_value(&[0x19, 0x01], 0),
            Err(CborError::Truncated { .. })
        ));
        assert!(matches!(
            decode_value(&[0x63, 0x61], 0),
            Err(CborError::Truncated { .. })
        ));
        assert!(matches!(
            decode_value(&[0xA1, 0x01, 0x02], 0),
            Err(CborError::UnsupportedMajorType { major: 5, .. })
        ));
        assert!(matches!(
            decode_value(&[0xC1, 0x00], 0),
            Err(CborError::UnsupportedMajorType { major: 6, .. })
        ));
        assert!(matches!(
            decode_value(&[0x62, 0xC3, 0x28], 0),
            Err(CborError::MalformedUtf8 { .. })
        ));
        assert!(matches!(
            decode_value(&[0x9F], 0),
            Err(CborError::UnsupportedValue { .. })
        ));
        assert!(matches!(
            decode_value(&[0xF6], 0),
            Err(CborError::UnsupportedValue { .. })
        ));
        assert!(matches!(
            decode_value(&[0x9B, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF], 0),
            Err(CborError::Truncated { .. })
        ));
        assert!(matches!(
            decode_value(&[0x00], 1),
            Err(CborError::CursorOutOfRange { .. })
        ));
        let deep = vec![0x81; MAX_DEPTH + 2];
        assert_eq!(decode_value(&deep, 0), Err(CborError::TooDeep));
    }

    fn leaf() -> impl Strategy<Value = FieldValue> {
        prop_oneof![
            prop_oneof![
                Just(23u64),
                Just(24),
                Just(255),
                Just(256),
                Just(65535),
                Just(65536),
                Just(u32::MAX as u64),
                Just(u32::MAX as u64 + 1),
                Just(u64::MAX),
                any::<u64>()
            ]
            .prop_map(FieldValue::UInt),
            any::<u64>().prop_map(FieldValue::NInt),
            any::<bool>().prop_map(FieldValue::Bool),
            any::<f64>().prop_map(FieldValue::Float),
            any::<f32>().prop_map(|x| FieldValue::Float(x as f64)),
            any::<u16>().prop_map(|h| FieldValue::Float(f16_to_f64(h))),
            ".{0,40}".prop_map(FieldValue::Text),
            proptest::collection::vec(any::<u8>(), 0..300).prop_map(FieldValue::Bytes),
        ]
    }

    fn value() -> impl Strategy<Value = FieldValue> {
        leaf().prop_recursive(3, 32, 6, |inner| {
            proptest::collection::vec(inner, 0..6).prop_map(FieldValue::Seq)
        })
    }

    proptest! {
        #[test]
        fn round_trip(v in value()) {
            let bytes = encode_value(&v);
            let (back, next) = decode_value(&bytes, 0).unwrap();
            prop_assert_eq!(next, bytes.len());
            prop_assert_eq!(back, v);
        }

        #[test]
        fn integer_heads_are_minimal(n in any::<u64>()) {
            let bytes = encode_value(&FieldValue::UInt(n));
            prop_assert_eq!(bytes.len(), head_len(n));
            // No narrower head can hold n.
            if bytes.len() > 1 {
                let narrower = match bytes.len() { 2 => 23, 3 => 0xFF, 5 => 0xFFFF, _ => 0xFFFF_FFFF };
                prop_assert!(n > narrower);
            }
        }

        #[test]
        fn float_width_is_minimal(x in any::<f64>()) {
            prop_assume!(!x.is_nan());
            let bytes = encode_value(&FieldValue::Float(x));
            let (back, _) = decode_value(&bytes, 0).unwrap();
            match back { FieldValue::Float(y) => prop_assert_eq!(y.to_bits(), x.to_bits()), _ => unreachable!() }
            match bytes.len() {
                3 => {}
                5 => prop_assert!(f64_to_f16_exact(x).is_none()),
                9 => prop_assert!((x as f32) as f64 != x),
                other => prop_assert!(false, "unexpected float length {}", other),
            }
        }

        #[test]
        fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 1..64)) {
            let _ = decode_values(&bytes);
        }
    }
}
