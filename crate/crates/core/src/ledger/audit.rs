//! Per-key lifecycle queries over a chain.

use thiserror::Error;

use super::block::BlockOp;
use super::chain::Chain;
use crate::cores::{DestAddr, DestructionPolicy, KeyCatalog, KeyMeta, KeyType, SourceAddr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("key id {0} never appears on the chain")]
    UnknownKeyId(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub index: u64,
    pub timestamp_ns: u64,
    pub op: BlockOp,
    pub source: SourceAddr,
    pub dest: DestAddr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTrace {
    pub key_id: u64,
    pub meta: Option<KeyMeta>,
    pub entries: Vec<TraceEntry>,
    /// A single-use key was written and never read or destroyed afterwards.
    pub non_destruction: bool,
}

/// Ordered chain entries touching `key_id`, with the non-destruction check
/// evaluated against `catalog`.
pub fn audit_key(chain: &Chain, key_id: u64, catalog: &KeyCatalog) -> Result<KeyTrace, AuditError> {
    let entries: Vec<TraceEntry> = chain
        .transactions()
        .iter()
        .filter(|b| b.key_id == key_id)
        .map(|b| TraceEntry {
            index: b.index,
            timestamp_ns: b.timestamp_ns,
            op: b.op,
            source: b.source,
            dest: b.dest,
        })
        .collect();
    if entries.is_empty() {
        return Err(AuditError::UnknownKeyId(key_id));
    }
    let meta = catalog.get(&key_id).copied();
    let non_destruction = meta.is_some_and(|m| {
        m.destroy_on_read && !m.destroyed && {
            let last_write = entries.iter().rposition(|e| e.op == BlockOp::Write);
            last_write.is_some_and(|w| !entries[w + 1..].iter().any(|e| e.op == BlockOp::Read))
        }
    });
    Ok(KeyTrace {
        key_id,
        meta,
        entries,
        non_destruction,
    })
}

/// Every key id written on the chain, in order of first appearance.
pub fn written_key_ids(chain: &Chain) -> Vec<u64> {
    let mut ids = Vec::new();
    for b in chain.transactions() {
        if b.op == BlockOp::Write && !ids.contains(&b.key_id) {
            ids.push(b.key_id);
        }
    }
    ids
}

/// Reconstructs key types from chain provenance alone, for audits of a dump
/// without access to MKM metadata.
///
/// Follows the key hierarchy: RNG writes are pre-master keys; the first Hash
/// write after a pre-master read is a master key; Hash writes after a master
/// read are the four session keys in split order. Destroyed flags are not
/// recoverable from the chain and are reported as false.
pub fn infer_catalog(chain: &Chain, policy: &DestructionPolicy) -> KeyCatalog {
    const SESSION: [KeyType; 4] = [
        KeyType::Encryption,
        KeyType::Encryption,
        KeyType::ClientMac,
        KeyType::ServerMac,
    ];
    let mut catalog = KeyCatalog::new();
    let mut last_read: Option<KeyType> = None;
    let mut slot = 0usize;
    for b in chain.transactions() {
        match b.op {
            BlockOp::Read => {
                last_read = catalog.get(&b.key_id).map(|m| m.key_type);
                slot = 0;
            }
            BlockOp::Write => {
                let t = match (b.source, last_read) {
                    (SourceAddr::Rng, _) => Some(KeyType::PreMaster),
                    (SourceAddr::Hash, Some(KeyType::PreMaster)) => {
                        last_read = None;
                        Some(KeyType::Master)
                    }
                    (SourceAddr::Hash, Some(KeyType::Master)) => {
                        let t = SESSION.get(slot).copied();
                        slot += 1;
                        t
                    }
                    _ => None,
                };
                if let Some(t) = t {
                    catalog.insert(
                        b.key_id,
                        KeyMeta {
                            key_type: t,
                            destroy_on_read: policy.destroy_on_read(t),
                            destroyed: false,
                        },
                    );
                }
            }
            BlockOp::Genesis => {}
        }
    }
    catalog
}
