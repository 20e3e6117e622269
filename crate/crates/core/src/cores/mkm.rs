use std::collections::BTreeMap;

use zeroize::{Zeroize, Zeroizing};

use super::{CoreError, KeyType, KeyUse, MemoryRegion};
use crate::crypto::{keccak_digest_parts, Digest512};
use crate::ledger::{commit_data, BlockOp, GrantToken};

/// One secret key and its lifecycle metadata.
pub struct KeyRecord {
    key_id: u64,
    key_type: KeyType,
    value: Zeroizing<Vec<u8>>,
    created_at_ns: u64,
    destroyed: bool,
    destroy_on_read: bool,
}

impl std::fmt::Debug for KeyRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyRecord")
            .field("key_id", &self.key_id)
            .field("key_type", &self.key_type)
            .field("created_at_ns", &self.created_at_ns)
            .field("destroyed", &self.destroyed)
            .field("destroy_on_read", &self.destroy_on_read)
            .finish_non_exhaustive()
    }
}

impl KeyRecord {
    pub fn new(
        key_id: u64,
        key_type: KeyType,
        value: Zeroizing<Vec<u8>>,
        created_at_ns: u64,
        destroy_on_read: bool,
    ) -> Result<Self, CoreError> {
        if value.len() != key_type.value_len() {
            return Err(CoreError::BadKeyLength {
                key_type,
                expected: key_type.value_len(),
                got: value.len(),
            });
        }
        Ok(Self {
            key_id,
            key_type,
            value,
            created_at_ns,
            destroyed: false,
            destroy_on_read,
        })
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn key_type(&self) -> KeyType {
        self.key_type
    }

    pub fn created_at_ns(&self) -> u64 {
        self.created_at_ns
    }

    pub fn destroyed(&self) -> bool {
        self.destroyed
    }

    pub fn destroy_on_read(&self) -> bool {
        self.destroy_on_read
    }

    /// Zeroed after destruction; length is retained.
    pub fn value(&self) -> &[u8] {
        &self.value
    }

    pub fn commitment(&self) -> Digest512 {
        commit_data(&self.value)
    }

    fn destroy(&mut self) {
        self.value.zeroize();
        self.value.resize(self.key_type.value_len(), 0);
        self.destroyed = true;
    }
}

/// Metadata view of a key, safe to hand to auditors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyMeta {
    pub key_type: KeyType,
    pub destroy_on_read: bool,
    pub destroyed: bool,
}

pub type KeyCatalog = BTreeMap<u64, KeyMeta>;

/// Which key types MKM zeroises after their first granted read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DestructionPolicy {
    pub pre_master: bool,
    pub master: bool,
    pub encryption: bool,
    pub client_mac: bool,
    pub server_mac: bool,
}

impl Default for DestructionPolicy {
    /// Pre-master and session keys are single-use; the master key persists
    /// so session keys can be re-derived.
    fn default() -> Self {
        Self {
            pre_master: true,
            master: false,
            encryption: true,
            client_mac: true,
            server_mac: true,
        }
    }
}

impl DestructionPolicy {
    pub fn destroy_on_read(&self, t: KeyType) -> bool {
        match t {
            KeyType::PreMaster => self.pre_master,
            KeyType::Master => self.master,
            KeyType::Encryption => self.encryption,
            KeyType::ClientMac => self.client_mac,
            KeyType::ServerMac => self.server_mac,
        }
    }

    pub fn set(&mut self, t: KeyType, on: bool) {
        match t {
            KeyType::PreMaster => self.pre_master = on,
            KeyType::Master => self.master = on,
            KeyType::Encryption => self.encryption = on,
            KeyType::ClientMac => self.client_mac = on,
            KeyType::ServerMac => self.server_mac = on,
        }
    }
}

/// Master key memory. Lives in the confidential region; every mutation
/// consumes a grant issued by the signature checker.
#[derive(Debug, Default)]
pub struct MkmState {
    records: BTreeMap<u64, KeyRecord>,
    served: Vec<u64>,
}

impl MkmState {
    pub const REGION: MemoryRegion = MemoryRegion::Confidential;

    pub fn contains(&self, key_id: u64) -> bool {
        self.records.contains_key(&key_id)
    }

    pub fn get(&self, key_id: u64) -> Option<&KeyRecord> {
        self.records.get(&key_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &KeyRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Chain indices of the blocks whose grants this memory has served.
    pub fn served_grants(&self) -> &[u64] {
        &self.served
    }

    pub fn live_values(&self) -> impl Iterator<Item = &[u8]> {
        self.records
            .values()
            .filter(|r| !r.destroyed)
            .map(|r| r.value())
    }

    pub fn catalog(&self) -> KeyCatalog {
        self.records
            .iter()
            .map(|(id, r)| {
                (
                    *id,
                    KeyMeta {
                        key_type: r.key_type,
                        destroy_on_read: r.destroy_on_read,
                        destroyed: r.destroyed,
                    },
                )
            })
            .collect()
    }

    /// Oldest live key that `use_` may consume.
    pub fn oldest_live_for(&self, use_: KeyUse) -> Option<u64> {
        self.records
            .values()
            .find(|r| !r.destroyed && use_.permits(r.key_type))
            .map(|r| r.key_id)
    }

    /// Digest over the full state, used to prove rejected transactions have
    /// no side effects.
    pub fn fingerprint(&self) -> Digest512 {
        let mut parts: Vec<Vec<u8>> = Vec::new();
        for r in self.records.values() {
            let mut p = Vec::with_capacity(96);
            p.extend_from_slice(&r.key_id.to_be_bytes());
            p.push(r.key_type as u8);
            p.push(u8::from(r.destroyed));
            p.push(u8::from(r.destroy_on_read));
            p.extend_from_slice(&r.created_at_ns.to_be_bytes());
            p.extend_from_slice(&r.value);
            parts.push(p);
        }
        let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
        keccak_digest_parts(&refs)
    }

    pub fn write(&mut self, record: KeyRecord, grant: Option<GrantToken>) -> Result<u64, CoreError> {
        let grant = grant.ok_or(CoreError::NoGrant)?;
        if grant.op() != BlockOp::Write
            || grant.key_id() != record.key_id
            || grant.commitment() != record.commitment()
        {
            return Err(CoreError::NoGrant);
        }
        if self.records.contains_key(&record.key_id) {
            return Err(CoreError::DuplicateKeyId(record.key_id));
        }
        let id = record.key_id;
        self.records.insert(id, record);
        self.served.push(grant.block_index());
        Ok(id)
    }

    pub fn read(
        &mut self,
        key_id: u64,
        requested: KeyUse,
        grant: Option<GrantToken>,
    ) -> Result<Zeroizing<Vec<u8>>, CoreError> {
        let grant = grant.ok_or(CoreError::NoGrant)?;
        if grant.op() != BlockOp::Read || grant.key_id() != key_id {
            return Err(CoreError::NoGrant);
        }
        let record = self
            .records
            .get_mut(&key_id)
            .filter(|r| !r.destroyed)
            .ok_or(CoreError::KeyNotFound(key_id))?;
        if !requested.permits(record.key_type) || grant.dest() != requested.port() {
            return Err(CoreError::KeyTypeMismatch {
                key_id,
                stored: record.key_type,
                requested,
            });
        }
        let value = Zeroizing::new(record.value.to_vec());
        if record.destroy_on_read {
            record.destroy();
        }
        self.served.push(grant.block_index());
        Ok(value)
    }

    pub fn destroy(&mut self, key_id: u64) -> Result<(), CoreError> {
        let record = self
            .records
            .get_mut(&key_id)
            .filter(|r| !r.destroyed)
            .ok_or(CoreError::KeyNotFound(key_id))?;
        record.destroy();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cores::DestAddr;

    fn record(id: u64, t: KeyType, fill: u8, dor: bool) -> KeyRecord {
        KeyRecord::new(id, t, Zeroizing::new(vec![fill; t.value_len()]), 0, dor).unwrap()
    }

    fn write_grant(r: &KeyRecord) -> GrantToken {
        GrantToken::new(1, BlockOp::Write, r.key_id(), DestAddr::Buff, r.commitment())
    }

    fn read_grant(id: u64, dest: DestAddr) -> GrantToken {
        GrantToken::new(2, BlockOp::Read, id, dest, Digest512::ZERO)
    }

    #[test]
    fn granted_premaster_write_then_single_read() {
        let mut mkm = MkmState::default();
        let r = record(1, KeyType::PreMaster, 7, true);
        let g = write_grant(&r);
        assert_eq!(mkm.write(r, Some(g)), Ok(1));
        let v = mkm
            .read(1, KeyUse::Derivation, Some(read_grant(1, DestAddr::HashKey)))
            .unwrap();
        assert_eq!(&v[..], &[7u8; 48][..]);
        assert_eq!(
            mkm.read(1, KeyUse::Derivation, Some(read_grant(1, DestAddr::HashKey))),
            Err(CoreError::KeyNotFound(1))
        );
        assert_eq!(mkm.served_grants(), &[1, 2]);
    }

    #[test]
    fn write_without_grant_leaves_mkm_unchanged() {
        let mut mkm = MkmState::default();
        let before = mkm.fingerprint();
        assert_eq!(
            mkm.write(record(1, KeyType::Master, 1, false), None),
            Err(CoreError::NoGrant)
        );
        assert_eq!(mkm.fingerprint(), before);
    }

    #[test]
    fn grant_for_different_data_is_refused() {
        let mut mkm = MkmState::default();
        let r = record(1, KeyType::Master, 1, false);
        let other = record(1, KeyType::Master, 2, false);
        let g = write_grant(&other);
        assert_eq!(mkm.write(r, Some(g)), Err(CoreError::NoGrant));
    }

    #[test]
    fn duplicate_key_id_rejected() {
        let mut mkm = MkmState::default();
        let a = record(5, KeyType::Master, 1, false);
        let ga = write_grant(&a);
        mkm.write(a, Some(ga)).unwrap();
        let b = record(5, KeyType::Master, 1, false);
        let gb = write_grant(&b);
        assert_eq!(mkm.write(b, Some(gb)), Err(CoreError::DuplicateKeyId(5)));
    }

    #[test]
    fn hash_side_request_for_encryption_key_is_type_mismatch() {
        let mut mkm = MkmState::default();
        let r = record(3, KeyType::Encryption, 9, true);
        let g = write_grant(&r);
        mkm.write(r, Some(g)).unwrap();
        assert!(matches!(
            mkm.read(3, KeyUse::Mac, Some(read_grant(3, DestAddr::HashKey))),
            Err(CoreError::KeyTypeMismatch { .. })
        ));
        // Not destroyed by the refused read.
        assert!(!mkm.get(3).unwrap().destroyed());
    }

    #[test]
    fn destroy_zeroes_value_and_keeps_metadata() {
        let mut mkm = MkmState::default();
        let r = record(4, KeyType::ClientMac, 0x55, true);
        let g = write_grant(&r);
        mkm.write(r, Some(g)).unwrap();
        mkm.destroy(4).unwrap();
        let rec = mkm.get(4).unwrap();
        assert!(rec.destroyed());
        assert_eq!(rec.value(), &[0u8; 16]);
        assert_eq!(rec.key_type(), KeyType::ClientMac);
        assert_eq!(mkm.destroy(4), Err(CoreError::KeyNotFound(4)));
        assert_eq!(mkm.live_values().count(), 0);
    }

    #[test]
    fn persistent_master_survives_reads() {
        let mut mkm = MkmState::default();
        let r = record(2, KeyType::Master, 3, false);
        let g = write_grant(&r);
        mkm.write(r, Some(g)).unwrap();
        for _ in 0..2 {
            mkm.read(2, KeyUse::Derivation, Some(read_grant(2, DestAddr::HashKey)))
                .unwrap();
        }
        assert!(!mkm.get(2).unwrap().destroyed());
    }

    #[test]
    fn bad_length_rejected_on_construction() {
        assert!(matches!(
            KeyRecord::new(1, KeyType::Encryption, Zeroizing::new(vec![0; 15]), 0, true),
            Err(CoreError::BadKeyLength { .. })
        ));
    }
}
