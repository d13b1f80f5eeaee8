//! Schema-driven flattening of structured messages into primitive values.

use thiserror::Error;

use super::cbor::FieldValue;

/// Shape of a message: leaves are primitive kinds, interior nodes are
/// structs with named ordered children or homogeneous sequences.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageSchema {
    UInt,
    Int,
    Bool,
    Float32,
    Float64,
    Text,
    Bytes,
    Struct(Vec<Field>),
    Sequence(Box<MessageSchema>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub schema: MessageSchema,
}

impl Field {
    pub fn new(name: impl Into<String>, schema: MessageSchema) -> Self {
        Self {
            name: name.into(),
            schema,
        }
    }
}

impl MessageSchema {
    pub fn structure(fields: impl IntoIterator<Item = (&'static str, MessageSchema)>) -> Self {
        MessageSchema::Struct(
            fields
                .into_iter()
                .map(|(name, schema)| Field::new(name, schema))
                .collect(),
        )
    }

    pub fn sequence(element: MessageSchema) -> Self {
        MessageSchema::Sequence(Box::new(element))
    }

    fn kind(&self) -> &'static str {
        match self {
            MessageSchema::UInt => "uint",
            MessageSchema::Int => "int",
            MessageSchema::Bool => "bool",
            MessageSchema::Float32 => "float32",
            MessageSchema::Float64 => "float64",
            MessageSchema::Text => "text",
            MessageSchema::Bytes => "bytes",
            MessageSchema::Struct(_) => "struct",
            MessageSchema::Sequence(_) => "sequence",
        }
    }
}

/// A typed message instance. Struct members are positional and follow the
/// schema's field order.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageValue {
    UInt(u64),
    Int(i64),
    Bool(bool),
    Float32(f32),
    Float64(f64),
    Text(String),
    Bytes(Vec<u8>),
    Struct(Vec<MessageValue>),
    Sequence(Vec<MessageValue>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlattenError {
    #[error("schema mismatch at {path}: expected {expected}, found {found}")]
    SchemaMismatch {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("value list exhausted while reading {path}")]
    Underrun { path: String },
    #[error("{count} value(s) left over after unflattening")]
    Overrun { count: usize },
}

fn mismatch(path: &str, schema: &MessageSchema, found: impl Into<String>) -> FlattenError {
    FlattenError::SchemaMismatch {
        path: if path.is_empty() {
            "<root>".into()
        } else {
            path.to_owned()
        },
        expected: schema.kind(),
        found: found.into(),
    }
}

fn child_path(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_owned()
    } else {
        format!("{path}.{name}")
    }
}

fn value_kind(v: &MessageValue) -> &'static str {
    match v {
        MessageValue::UInt(_) => "uint",
        MessageValue::Int(_) => "int",
        MessageValue::Bool(_) => "bool",
        MessageValue::Float32(_) => "float32",
        MessageValue::Float64(_) => "float64",
        MessageValue::Text(_) => "text",
        MessageValue::Bytes(_) => "bytes",
        MessageValue::Struct(_) => "struct",
        MessageValue::Sequence(_) => "sequence",
    }
}

fn flatten_into(
    msg: &MessageValue,
    schema: &MessageSchema,
    path: &str,
    out: &mut Vec<FieldValue>,
) -> Result<(), FlattenError> {
    match (schema, msg) {
        (MessageSchema::UInt, MessageValue::UInt(n)) => out.push(FieldValue::UInt(*n)),
        (MessageSchema::Int, MessageValue::Int(n)) => out.push(FieldValue::int(*n)),
        (MessageSchema::Bool, MessageValue::Bool(b)) => out.push(FieldValue::Bool(*b)),
        (MessageSchema::Float32, MessageValue::Float32(x)) => out.push(FieldValue::Float(*x as f64)),
        (MessageSchema::Float64, MessageValue::Float64(x)) => out.push(FieldValue::Float(*x)),
        (MessageSchema::Text, MessageValue::Text(s)) => out.push(FieldValue::Text(s.clone())),
        (MessageSchema::Bytes, MessageValue::Bytes(b)) => out.push(FieldValue::Bytes(b.clone())),
        (MessageSchema::Struct(fields), MessageValue::Struct(members)) => {
            if fields.len() != members.len() {
                return Err(mismatch(path, schema, format!("struct with {} members", members.len())));
            }
            for (field, member) in fields.iter().zip(members) {
                flatten_into(member, &field.schema, &child_path(path, &field.name), out)?;
            }
        }
        (MessageSchema::Sequence(element), MessageValue::Sequence(items)) => {
            out.push(FieldValue::UInt(items.len() as u64));
            for (i, item) in items.iter().enumerate() {
                flatten_into(item, element, &format!("{path}[{i}]"), out)?;
            }
        }
        (_, other) => return Err(mismatch(path, schema, value_kind(other))),
    }
    Ok(())
}

/// Depth-first, declaration-order walk producing one primitive per leaf.
/// Sequences contribute their element count first.
pub fn flatten(msg: &MessageValue, schema: &MessageSchema) -> Result<Vec<FieldValue>, FlattenError> {
    let mut out = Vec::new();
    flatten_into(msg, schema, "", &mut out)?;
    Ok(out)
}

struct Reader<'a> {
    values: &'a [FieldValue],
    pos: usize,
}

impl Reader<'_> {
    fn next(&mut self, path: &str) -> Result<&FieldValue, FlattenError> {
        let v = self.values.get(self.pos).ok_or_else(|| FlattenError::Underrun {
            path: if path.is_empty() {
                "<root>".into()
            } else {
                path.to_owned()
            },
        })?;
        self.pos += 1;
        Ok(v)
    }

    fn read(&mut self, schema: &MessageSchema, path: &str) -> Result<MessageValue, FlattenError> {
        if let MessageSchema::Struct(fields) = schema {
            let mut members = Vec::with_capacity(fields.len());
            for field in fields {
                members.push(self.read(&field.schema, &child_path(path, &field.name))?);
            }
            return Ok(MessageValue::Struct(members));
        }
        let v = self.next(path)?;
        let found = || v.kind();
        Ok(match schema {
            MessageSchema::UInt => match v {
                FieldValue::UInt(n) => MessageValue::UInt(*n),
                _ => return Err(mismatch(path, schema, found())),
            },
            MessageSchema::Int => {
                let n = v
                    .as_i128()
                    .and_then(|n| i64::try_from(n).ok())
                    .ok_or_else(|| mismatch(path, schema, found()))?;
                MessageValue::Int(n)
            }
            MessageSchema::Bool => match v {
                FieldValue::Bool(b) => MessageValue::Bool(*b),
                _ => return Err(mismatch(path, schema, found())),
            },
            MessageSchema::Float32 => match v {
                FieldValue::Float(x) => MessageValue::Float32(*x as f32),
                _ => return Err(mismatch(path, schema, found())),
            },
            MessageSchema::Float64 => match v {
                FieldValue::Float(x) => MessageValue::Float64(*x),
                _ => return Err(mismatch(path, schema, found())),
            },
            MessageSchema::Text => match v {
                FieldValue::Text(s) => MessageValue::Text(s.clone()),
                _ => return Err(mismatch(path, schema, found())),
            },
            MessageSchema::Bytes => match v {
                FieldValue::Bytes(b) => MessageValue::Bytes(b.clone()),
                _ => return Err(mismatch(path, schema, found())),
            },
            MessageSchema::Sequence(element) => {
                let count = match v {
                    FieldValue::UInt(n) => *n,
                    _ => return Err(mismatch(path, schema, format!("{} count", found()))),
                };
                // Each element consumes at least one value unless it is an
                // empty struct, so a count beyond the remainder cannot be valid.
                let remaining = (self.values.len() - self.pos) as u64;
                if count > remaining && !is_empty_struct(element) {
                    return Err(FlattenError::Underrun { path: path.to_owned() });
                }
                let mut items = Vec::with_capacity(count.min(remaining) as usize);
                for i in 0..count {
                    items.push(self.read(element, &format!("{path}[{i}]"))?);
                }
                MessageValue::Sequence(items)
            }
            MessageSchema::Struct(_) => unreachable!(),
        })
    }
}

fn is_empty_struct(schema: &MessageSchema) -> bool {
    match schema {
        MessageSchema::Struct(fields) => fields.iter().all(|f| is_empty_struct(&f.schema)),
        _ => false,
    }
}

/// Inverse of [`flatten`]; the value list must be consumed exactly.
pub fn unflatten(values: &[FieldValue], schema: &MessageSchema) -> Result<MessageValue, FlattenError> {
    let mut reader = Reader { values, pos: 0 };
    let msg = reader.read(schema, "")?;
    if reader.pos != values.len() {
        return Err(FlattenError::Overrun {
            count: values.len() - reader.pos,
        });
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab_schema() -> MessageSchema {
        MessageSchema::structure([("a", MessageSchema::UInt), ("b", MessageSchema::Text)])
    }

    #[test]
    fn flatten_examples() {
        let msg = MessageValue::Struct(vec![MessageValue::UInt(10), MessageValue::Text("abc".into())]);
        assert_eq!(
            flatten(&msg, &ab_schema()).unwrap(),
            vec![FieldValue::UInt(10), FieldValue::Text("abc".into())]
        );

        let seq_schema = MessageSchema::structure([("xs", MessageSchema::sequence(MessageSchema::UInt))]);
        let seq_msg = MessageValue::Struct(vec![MessageValue::Sequence(vec![
            MessageValue::UInt(7),
            MessageValue::UInt(9),
        ])]);
        let flat = flatten(&seq_msg, &seq_schema).unwrap();
        assert_eq!(
            flat,
            vec![FieldValue::UInt(2), FieldValue::UInt(7), FieldValue::UInt(9)]
        );
        assert_eq!(unflatten(&flat, &seq_schema).unwrap(), seq_msg);

        let empty = MessageSchema::Struct(vec![]);
        assert!(flatten(&MessageValue::Struct(vec![]), &empty).unwrap().is_empty());
    }

    #[test]
    fn unflatten_examples() {
        let values = vec![FieldValue::UInt(10), FieldValue::Text("abc".into())];
        assert_eq!(
            unflatten(&values, &ab_schema()).unwrap(),
            MessageValue::Struct(vec![MessageValue::UInt(10), MessageValue::Text("abc".into())])
        );

        let seq = MessageSchema::sequence(MessageSchema::UInt);
        assert_eq!(
            unflatten(&[FieldValue::UInt(0)], &seq).unwrap(),
            MessageValue::Sequence(vec![])
        );
        assert!(matches!(
            unflatten(&[FieldValue::UInt(2), FieldValue::UInt(7)], &seq),
            Err(FlattenError::Underrun { .. })
        ));
    }

    #[test]
    fn unflatten_errors() {
        assert!(matches!(
            unflatten(&[FieldValue::UInt(1), FieldValue::UInt(2)], &MessageSchema::UInt),
            Err(FlattenError::Overrun { count: 1 })
        ));
        assert!(matches!(
            unflatten(&[FieldValue::Bool(true)], &MessageSchema::UInt),
            Err(FlattenError::SchemaMismatch { .. })
        ));
        assert!(matches!(
            unflatten(&[FieldValue::UInt(u64::MAX)], &MessageSchema::Int),
            Err(FlattenError::SchemaMismatch { .. })
        ));
        assert!(matches!(
            unflatten(
                &[FieldValue::UInt(u64::MAX)],
                &MessageSchema::sequence(MessageSchema::Bool)
            ),
            Err(FlattenError::Underrun { .. })
        ));
        assert!(matches!(
            flatten(&MessageValue::Bool(true), &MessageSchema::Text),
            Err(FlattenError::SchemaMismatch { .. })
        ));
    }

    fn leaf_schema() -> impl Strategy<Value = MessageSchema> {
        prop_oneof![
            Just(MessageSchema::UInt),
            Just(MessageSchema::Int),
            Just(MessageSchema::Bool),
            Just(MessageSchema::Float32),
            Just(MessageSchema::Float64),
            Just(MessageSchema::Text),
            Just(MessageSchema::Bytes),
        ]
    }

    pub(crate) fn schema_strategy() -> impl Strategy<Value = MessageSchema> {
        leaf_schema().prop_recursive(4, 24, 5, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..5).prop_map(|children| {
                    MessageSchema::Struct(
                        children
                            .into_iter()
                            .enumerate()
                            .map(|(i, s)| Field::new(format!("f{i}"), s))
                            .collect(),
                    )
                }),
                inner.prop_map(MessageSchema::sequence),
            ]
        })
    }

    pub(crate) fn message_for(schema: &MessageSchema) -> BoxedStrategy<MessageValue> {
        match schema {
            MessageSchema::UInt => any::<u64>().prop_map(MessageValue::UInt).boxed(),
            MessageSchema::Int => any::<i64>().prop_map(MessageValue::Int).boxed(),
            MessageSchema::Bool => any::<bool>().prop_map(MessageValue::Bool).boxed(),
            MessageSchema::Float32 => any::<f32>()
                .prop_filter("nan", |x| !x.is_nan())
                .prop_map(MessageValue::Float32)
                .boxed(),
            MessageSchema::Float64 => any::<f64>()
                .prop_filter("nan", |x| !x.is_nan())
                .prop_map(MessageValue::Float64)
                .boxed(),
            MessageSchema::Text => ".{0,12}".prop_map(MessageValue::Text).boxed(),
            MessageSchema::Bytes => proptest::collection::vec(any::<u8>(), 0..16)
                .prop_map(MessageValue::Bytes)
                .boxed(),
            MessageSchema::Struct(fields) => {
                let parts: Vec<_> = fields.iter().map(|f| message_for(&f.schema)).collect();
                parts.prop_map(MessageValue::Struct).boxed()
            }
            MessageSchema::Sequence(element) => proptest::collection::vec(message_for(element), 0..4)
                .prop_map(MessageValue::Sequence)
                .boxed(),
        }
    }

    proptest! {
        #[test]
        fn flatten_unflatten_inverse(
            (schema, msg) in schema_strategy().prop_flat_map(|s| {
                let m = message_for(&s);
                (Just(s), m)
            })
        ) {
            let flat = flatten(&msg, &schema).unwrap();
            prop_assert_eq!(unflatten(&flat, &schema).unwrap(), msg);
        }
    }
}
