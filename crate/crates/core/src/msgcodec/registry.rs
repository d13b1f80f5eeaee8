//! Static name ↔ id table for topics and services.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Topic,
    Service,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown stream {0:?}")]
    UnknownStream(String),
    #[error("unknown stream id {0}")]
    UnknownStreamId(u8),
    #[error("stream id {id} is assigned to both {first:?} and {second:?}")]
    DuplicateId { id: u8, first: String, second: String },
    #[error("stream name {0:?} is registered twice")]
    DuplicateName(String),
    #[error("stream id for {name:?} must be in 0..=255, got {value}")]
    IdOutOfRange { name: String, value: i64 },
    #[error("failed to read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid registry document: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    #[serde(default)]
    topics: BTreeMap<String, i64>,
    #[serde(default)]
    services: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, Default)]
pub struct StreamRegistry {
    by_name: HashMap<String, (u8, StreamKind)>,
    by_id: HashMap<u8, String>,
}

impl StreamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, id: u8, kind: StreamKind) -> Result<(), RegistryError> {
        if self.by_name.contains_key(name) {
            return Err(RegistryError::DuplicateName(name.to_owned()));
        }
        if let Some(first) = self.by_id.get(&id) {
            return Err(RegistryError::DuplicateId {
                id,
                first: first.clone(),
                second: name.to_owned(),
            });
        }
        self.by_name.insert(name.to_owned(), (id, kind));
        self.by_id.insert(id, name.to_owned());
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let doc: RegistryDoc = serde_json::from_str(text)?;
        let mut reg = Self::new();
        let entries = doc
            .topics
            .iter()
            .map(|e| (e, StreamKind::Topic))
            .chain(doc.services.iter().map(|e| (e, StreamKind::Service)));
        for ((name, &value), kind) in entries {
            let id = u8::try_from(value).map_err(|_| RegistryError::IdOutOfRange {
                name: name.clone(),
                value,
            })?;
            reg.insert(name, id, kind)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn lookup(&self, name: &str) -> Result<u8, RegistryError> {
        self.by_name
            .get(name)
            .map(|(id, _)| *id)
            .ok_or_else(|| RegistryError::UnknownStream(name.to_owned()))
    }

    pub fn reverse(&self, id: u8) -> Result<&str, RegistryError> {
        self.by_id
            .get(&id)
            .map(String::as_str)
            .ok_or(RegistryError::UnknownStreamId(id))
    }

    pub fn kind(&self, name: &str) -> Option<StreamKind> {
        self.by_name.get(name).map(|(_, k)| *k)
    }

    pub fn contains_id(&self, id: u8) -> bool {
        self.by_id.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = include_str!("../../fixtures/registry.json");

    #[test]
    fn fixture_lookups() {
        let reg = StreamRegistry::from_json(FIXTURE).unwrap();
        assert_eq!(reg.lookup("follower/data").unwrap(), 3);
        assert_eq!(reg.lookup("buoy/trigger").unwrap(), 1);
        assert_eq!(reg.lookup("leader/repos_cmd").unwrap(), 2);
        assert_eq!(reg.reverse(3).unwrap(), "follower/data");
        assert!(matches!(
            reg.lookup("nonexistent"),
            Err(RegistryError::UnknownStream(_))
        ));
        assert!(matches!(reg.reverse(200), Err(RegistryError::UnknownStreamId(200))));
        assert_eq!(reg.kind("follower/data"), Some(StreamKind::Topic));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let doc = r#"{"topics": {"a": 1}, "services": {"b": 1}}"#;
        assert!(matches!(
            StreamRegistry::from_json(doc),
            Err(RegistryError::DuplicateId { id: 1, .. })
        ));
        let doc = r#"{"topics": {"a": 256}}"#;
        assert!(matches!(
            StreamRegistry::from_json(doc),
            Err(RegistryError::IdOutOfRange { .. })
        ));
        let doc = r#"{"topics": {}, "extra": 1}"#;
        assert!(StreamRegistry::from_json(doc).is_err());
    }

    #[test]
    fn bijection_holds() {
        let reg = StreamRegistry::from_json(FIXTURE).unwrap();
        for id in 0..=255u8 {
            if let Ok(name) = reg.reverse(id) {
                assert_eq!(reg.lookup(name).unwrap(), id);
            }
        }
    }
}
