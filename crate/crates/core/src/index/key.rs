use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::trace::BlockId;

pub const KEY_LEN: usize = 32;
pub const NAMESPACE_LEN: usize = 24;
pub const VALUE_LEN: usize = 8;

/// 24-byte tag scoping a block-id space.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Namespace(pub [u8; NAMESPACE_LEN]);

impl Namespace {
    pub const ZERO: Namespace = Namespace([0; NAMESPACE_LEN]);

    /// Label bytes, zero padded. `None` if the label is longer than 24 bytes.
    pub fn from_label(label: &str) -> Option<Self> {
        let bytes = label.as_bytes();
        if bytes.len() > NAMESPACE_LEN {
            return None;
        }
        let mut tag = [0u8; NAMESPACE_LEN];
        tag[..bytes.len()].copy_from_slice(bytes);
        Some(Namespace(tag))
    }

    pub fn label(&self) -> String {
        let end = self.0.iter().rposition(|&b| b != 0).map_or(0, |i| i + 1);
        String::from_utf8_lossy(&self.0[..end]).into_owned()
    }
}

impl Serialize for Namespace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Namespace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        Namespace::from_label(&label)
            .ok_or_else(|| serde::de::Error::custom("namespace label longer than 24 bytes"))
    }
}

impl fmt::Debug for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Namespace({:?})", self.label())
    }
}

/// Order-preserving metadata key: `namespace ‖ big-endian block id`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetaKey(pub [u8; KEY_LEN]);

impl MetaKey {
    pub fn encode(ns: Namespace, id: BlockId) -> Self {
        let mut bytes = [0u8; KEY_LEN];
        bytes[..NAMESPACE_LEN].copy_from_slice(&ns.0);
        bytes[NAMESPACE_LEN..].copy_from_slice(&id.0.to_be_bytes());
        MetaKey(bytes)
    }

    pub fn decode(&self) -> (Namespace, BlockId) {
        (self.namespace(), self.block_id())
    }

    pub fn namespace(&self) -> Namespace {
        let mut tag = [0u8; NAMESPACE_LEN];
        tag.copy_from_slice(&self.0[..NAMESPACE_LEN]);
        Namespace(tag)
    }

    /// The trailing 8 bytes read as a block id. Meaningless for hashed keys.
    pub fn block_id(&self) -> BlockId {
        let mut id = [0u8; 8];
        id.copy_from_slice(&self.0[NAMESPACE_LEN..]);
        BlockId(u64::from_be_bytes(id))
    }

    /// SHA-256 of `namespace ‖ big-endian id`; destroys ordering.
    pub fn hashed(ns: Namespace, id: BlockId) -> Self {
        let mut h = Sha256::new();
        h.update(ns.0);
        h.update(id.0.to_be_bytes());
        MetaKey(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for MetaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (ns, id) = self.decode();
        write!(f, "MetaKey({:?}, {})", ns.label(), id.0)
    }
}

pub fn encode_key(ns: Namespace, id: BlockId) -> MetaKey {
    MetaKey::encode(ns, id)
}

pub fn decode_key(key: &MetaKey) -> (Namespace, BlockId) {
    key.decode()
}

/// Opaque 8-byte locator of a KVC block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MetaValue(pub u64);

impl MetaValue {
    pub fn to_bytes(self) -> [u8; VALUE_LEN] {
        self.0.to_be_bytes()
    }

    pub fn from_bytes(b: [u8; VALUE_LEN]) -> Self {
        MetaValue(u64::from_be_bytes(b))
    }
}

/// How block ids become store keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyScheme {
    /// `namespace ‖ big-endian id`; range scans are meaningful.
    #[default]
    Ordered,
    /// 32-byte digest of the id; only point operations are issued.
    StrictHash,
}

impl KeyScheme {
    pub fn key(self, ns: Namespace, id: BlockId) -> MetaKey {
        match self {
            KeyScheme::Ordered => MetaKey::encode(ns, id),
            KeyScheme::StrictHash => MetaKey::hashed(ns, id),
        }
    }

    pub fn supports_scans(self) -> bool {
        matches!(self, KeyScheme::Ordered)
    }
}
