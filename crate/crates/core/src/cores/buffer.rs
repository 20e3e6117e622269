use std::collections::VecDeque;

use zeroize::Zeroizing;

use super::{DerivedKey, DestAddr, KeyType, KeyUse, SourceAddr};
use crate::crypto::{Digest512, Signature1024};
use crate::ledger::Block;

/// Data widths the three producers can write: a 128-bit session key slice,
/// a 384-bit RNG draw, a 512-bit Keccak output and a 1024-bit RSA output.
pub const PAYLOAD_WIDTHS: [usize; 4] = [16, 48, 64, 128];

/// Data portion of the buffer.
pub struct BufferPayload {
    bytes: Zeroizing<Vec<u8>>,
    origin: SourceAddr,
    key_type: KeyType,
}

impl std::fmt::Debug for BufferPayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BufferPayload")
            .field("len", &self.bytes.len())
            .field("origin", &self.origin)
            .field("key_type", &self.key_type)
            .finish()
    }
}

impl BufferPayload {
    pub fn new(bytes: Zeroizing<Vec<u8>>, origin: SourceAddr, key_type: KeyType) -> Self {
        assert!(
            PAYLOAD_WIDTHS.contains(&bytes.len()),
            "buffer payload of {} bytes",
            bytes.len()
        );
        Self {
            bytes,
            origin,
            key_type,
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn origin(&self) -> SourceAddr {
        self.origin
    }

    /// Key type the payload will be stored as if written to MKM.
    pub fn key_type(&self) -> KeyType {
        self.key_type
    }

    pub fn into_bytes(self) -> Zeroizing<Vec<u8>> {
        self.bytes
    }
}

/// What a composed transaction asks the master key memory to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    Write {
        key_type: KeyType,
        destroy_on_read: bool,
    },
    Read {
        key_use: KeyUse,
    },
}

/// A composed block travelling through the signature pipeline.
#[derive(Debug, Clone)]
pub struct PendingTx {
    /// Block preimage; its signature field stays zero until commit.
    pub block: Block,
    pub intent: Intent,
    /// Digest loaded back from the hash core.
    pub digest: Option<Digest512>,
    /// Signature loaded back from the PubEn core.
    pub signature: Option<Signature1024>,
}

/// A key released by MKM after a granted read, waiting to be routed to the
/// port the grant names.
pub struct GrantedRead {
    key_id: u64,
    key_type: KeyType,
    dest: DestAddr,
    value: Zeroizing<Vec<u8>>,
}

impl std::fmt::Debug for GrantedRead {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrantedRead")
            .field("key_id", &self.key_id)
            .field("key_type", &self.key_type)
            .field("dest", &self.dest)
            .finish_non_exhaustive()
    }
}

impl GrantedRead {
    pub fn new(key_id: u64, key_type: KeyType, dest: DestAddr, value: Zeroizing<Vec<u8>>) -> Self {
        Self {
            key_id,
            key_type,
            dest,
            value,
        }
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn key_type(&self) -> KeyType {
        self.key_type
    }

    pub fn dest(&self) -> DestAddr {
        self.dest
    }

    pub fn value(&self) -> &[u8] {
        &self.value
    }

    pub fn into_key(self) -> DerivedKey {
        DerivedKey::new(self.key_type, self.value)
    }
}

/// Gateway to MKM. Holds at most one pending transaction.
#[derive(Debug, Default)]
pub struct BufferState {
    payload: Option<BufferPayload>,
    staged: VecDeque<DerivedKey>,
    pending: Option<PendingTx>,
    granted: Option<GrantedRead>,
}

impl BufferState {
    pub fn payload(&self) -> Option<&BufferPayload> {
        self.payload.as_ref()
    }

    pub fn set_payload(&mut self, p: BufferPayload) {
        self.payload = Some(p);
    }

    pub fn take_payload(&mut self) -> Option<BufferPayload> {
        self.payload.take()
    }

    /// Keys produced by the hash core that still need their own write block.
    pub fn staged(&self) -> &VecDeque<DerivedKey> {
        &self.staged
    }

    /// Queues derived keys; the first one becomes the data portion.
    pub fn stage_keys(&mut self, keys: Vec<DerivedKey>) {
        self.staged.extend(keys);
        self.advance_staged();
    }

    /// Moves the next staged key into the data portion if it is free.
    pub fn advance_staged(&mut self) {
        if self.payload.is_none() {
            if let Some(k) = self.staged.pop_front() {
                let t = k.key_type();
                self.payload = Some(BufferPayload::new(k.into_value(), SourceAddr::Hash, t));
            }
        }
    }

    pub fn pending(&self) -> Option<&PendingTx> {
        self.pending.as_ref()
    }

    pub fn pending_mut(&mut self) -> Option<&mut PendingTx> {
        self.pending.as_mut()
    }

    pub fn set_pending(&mut self, tx: PendingTx) {
        debug_assert!(self.pending.is_none());
        self.pending = Some(tx);
    }

    pub fn take_pending(&mut self) -> Option<PendingTx> {
        self.pending.take()
    }

    pub fn granted(&self) -> Option<&GrantedRead> {
        self.granted.as_ref()
    }

    pub fn set_granted(&mut self, g: GrantedRead) {
        self.granted = Some(g);
    }

    pub fn take_granted(&mut self) -> Option<GrantedRead> {
        self.granted.take()
    }

    /// Drops the pending transaction and its data, as the signature checker
    /// does on rejection.
    pub fn discard_transaction(&mut self) {
        self.pending = None;
        self.payload = None;
        self.advance_staged();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_keys_feed_payload_one_at_a_time() {
        let mut b = BufferState::default();
        b.stage_keys(vec![
            DerivedKey::new(KeyType::Encryption, Zeroizing::new(vec![1; 16])),
            DerivedKey::new(KeyType::ClientMac, Zeroizing::new(vec![2; 16])),
        ]);
        assert_eq!(b.payload().unwrap().key_type(), KeyType::Encryption);
        assert_eq!(b.staged().len(), 1);
        b.take_payload();
        b.advance_staged();
        assert_eq!(b.payload().unwrap().key_type(), KeyType::ClientMac);
        assert!(b.staged().is_empty());
    }

    #[test]
    #[should_panic(expected = "buffer payload of 20 bytes")]
    fn odd_payload_width_rejected() {
        BufferPayload::new(Zeroizing::new(vec![0; 20]), SourceAddr::Rng, KeyType::PreMaster);
    }
}
