//! The signature checker: composes and signs blocks, and grants or rejects
//! MKM transactions.

use std::fmt;

use thiserror::Error;
use zeroize::Zeroizing;

use super::block::{commit_data, Block, BlockOp, SignatureScope};
use super::chain::Chain;
use super::registry::{requestee, IpRegistry};
use crate::cores::{
    CoreError, DestAddr, GrantedRead, Intent, IpId, KeyRecord, MkmState, SourceAddr,
};
use crate::crypto::{rsa_sign, rsa_verify, Digest512, RsaError, RsaKeyPair};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("buffer holds no data to commit")]
    EmptyBuffer,
    #[error("block is requested by {expected:?} but signer is {actual:?}")]
    SignerMismatch { expected: IpId, actual: IpId },
    #[error("genesis blocks cannot be signed")]
    NoRequestee,
}

/// Single-use capability for exactly one MKM access, bound to the block that
/// was appended to the chain for it.
#[derive(Debug, PartialEq, Eq)]
pub struct GrantToken {
    block_index: u64,
    op: BlockOp,
    key_id: u64,
    dest: DestAddr,
    commitment: Digest512,
}

impl GrantToken {
    pub(crate) fn new(
        block_index: u64,
        op: BlockOp,
        key_id: u64,
        dest: DestAddr,
        commitment: Digest512,
    ) -> Self {
        Self {
            block_index,
            op,
            key_id,
            dest,
            commitment,
        }
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    pub fn op(&self) -> BlockOp {
        self.op
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn dest(&self) -> DestAddr {
        self.dest
    }

    pub fn commitment(&self) -> Digest512 {
        self.commitment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    SignatureMismatch,
    /// The signature verifies, but under another registered IP's key.
    SignerMismatch(IpId),
    MalformedSignature,
    UnknownRequestee,
    ChainMismatch,
    TimestampRegression,
    DataMismatch,
    IntentMismatch,
    KeyTypeMismatch,
    KeyNotFound,
    DuplicateKeyId,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            Self::SignatureMismatch => "signature_mismatch",
            Self::SignerMismatch(_) => "signer_mismatch",
            Self::MalformedSignature => "malformed_signature",
            Self::UnknownRequestee => "unknown_requestee",
            Self::ChainMismatch => "chain_mismatch",
            Self::TimestampRegression => "timestamp_regression",
            Self::DataMismatch => "data_mismatch",
            Self::IntentMismatch => "intent_mismatch",
            Self::KeyTypeMismatch => "key_type_mismatch",
            Self::KeyNotFound => "key_not_found",
            Self::DuplicateKeyId => "duplicate_key_id",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SignerMismatch(ip) => write!(f, "signer_mismatch({})", ip.name()),
            other => f.write_str(other.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditKind {
    Rejected(RejectReason),
    Warning(String),
}

/// Off-chain record of a discarded transaction or a datapath warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEvent {
    pub timestamp_ns: u64,
    pub kind: AuditKind,
    pub source: Option<SourceAddr>,
}

impl AuditEvent {
    pub fn rejected(timestamp_ns: u64, reason: RejectReason, source: SourceAddr) -> Self {
        Self {
            timestamp_ns,
            kind: AuditKind::Rejected(reason),
            source: Some(source),
        }
    }

    pub fn warning(timestamp_ns: u64, msg: impl Into<String>) -> Self {
        Self {
            timestamp_ns,
            kind: AuditKind::Warning(msg.into()),
            source: None,
        }
    }

    pub fn reject_reason(&self) -> Option<RejectReason> {
        match self.kind {
            AuditKind::Rejected(r) => Some(r),
            AuditKind::Warning(_) => None,
        }
    }
}

/// Fields the buffer contributes to a new block.
#[derive(Debug, Clone, Copy)]
pub struct BlockRequest<'a> {
    pub op: BlockOp,
    pub source: SourceAddr,
    pub dest: DestAddr,
    pub key_id: u64,
    pub data: &'a [u8],
    pub status: u32,
    pub timestamp_ns: u64,
}

/// Builds the unsigned preimage of the next block. Pure.
pub fn compose_block(chain: &Chain, req: &BlockRequest<'_>) -> Result<Block, LedgerError> {
    if req.op == BlockOp::Write && req.data.is_empty() {
        return Err(LedgerError::EmptyBuffer);
    }
    if req.op == BlockOp::Genesis {
        return Err(LedgerError::NoRequestee);
    }
    Ok(Block {
        index: chain.len() as u64,
        timestamp_ns: req.timestamp_ns,
        op: req.op,
        source: req.source,
        dest: req.dest,
        status: req.status,
        key_id: req.key_id,
        data_commitment: commit_data(req.data),
        pre_hash: chain.head_hash(),
        signature: Default::default(),
    })
}

/// Signs a preimage with the requestee's keypair.
pub fn sign_block(
    preimage: &Block,
    signer: &RsaKeyPair,
    scope: SignatureScope,
) -> Result<Block, LedgerError> {
    let expected = requestee(preimage).ok_or(LedgerError::NoRequestee)?;
    if signer.owner() != expected {
        return Err(LedgerError::SignerMismatch {
            expected,
            actual: signer.owner(),
        });
    }
    let mut block = *preimage;
    block.signature = rsa_sign(&preimage.signed_digest(scope), signer)
        .expect("512-bit digest is below a 1024-bit modulus");
    Ok(block)
}

/// A signed block together with the buffer contents it commits to.
#[derive(Debug, Clone, Copy)]
pub struct Transaction<'a> {
    pub block: Block,
    pub data: &'a [u8],
    pub intent: Intent,
}

#[derive(Debug)]
pub enum Committed {
    Written { block_index: u64, key_id: u64 },
    Read { block_index: u64, granted: GrantedRead },
}

impl Committed {
    pub fn block_index(&self) -> u64 {
        match self {
            Self::Written { block_index, .. } | Self::Read { block_index, .. } => *block_index,
        }
    }
}

fn check_signature(
    block: &Block,
    registry: &IpRegistry,
    scope: SignatureScope,
) -> Result<(), RejectReason> {
    let ip = requestee(block).ok_or(RejectReason::UnknownRequestee)?;
    let key = registry.get(ip).ok_or(RejectReason::UnknownRequestee)?;
    let expected = block.signed_digest(scope);
    match rsa_verify(&block.signature, key) {
        Ok(d) if d == expected => return Ok(()),
        Err(RsaError::MalformedSignature) => return Err(RejectReason::MalformedSignature),
        _ => {}
    }
    for (other, pk) in registry.iter().filter(|(o, _)| *o != ip) {
        if rsa_verify(&block.signature, pk).is_ok_and(|d| d == expected) {
            return Err(RejectReason::SignerMismatch(other));
        }
    }
    Err(RejectReason::SignatureMismatch)
}

fn precheck(
    chain: &Chain,
    registry: &IpRegistry,
    mkm: &MkmState,
    tx: &Transaction<'_>,
    scope: SignatureScope,
) -> Result<(), RejectReason> {
    let b = &tx.block;
    match (tx.intent, b.op) {
        (Intent::Write { .. }, BlockOp::Write) | (Intent::Read { .. }, BlockOp::Read) => {}
        _ => return Err(RejectReason::IntentMismatch),
    }
    check_signature(b, registry, scope)?;
    if b.index != chain.len() as u64 || b.pre_hash != chain.head_hash() {
        return Err(RejectReason::ChainMismatch);
    }
    if b.timestamp_ns < chain.head().timestamp_ns {
        return Err(RejectReason::TimestampRegression);
    }
    if commit_data(tx.data) != b.data_commitment {
        return Err(RejectReason::DataMismatch);
    }
    match tx.intent {
        Intent::Write { key_type, .. } => {
            if tx.data.len() != key_type.value_len() {
                return Err(RejectReason::DataMismatch);
            }
            if mkm.contains(b.key_id) {
                return Err(RejectReason::DuplicateKeyId);
            }
        }
        Intent::Read { key_use } => {
            let rec = mkm
                .get(b.key_id)
                .filter(|r| !r.destroyed())
                .ok_or(RejectReason::KeyNotFound)?;
            if !key_use.permits(rec.key_type()) || b.dest != key_use.port() {
                return Err(RejectReason::KeyTypeMismatch);
            }
        }
    }
    Ok(())
}

/// Verifies a signed transaction and, if every check passes, appends its
/// block, issues a grant and performs the MKM access with it.
///
/// On any failure the chain and MKM are left untouched and the returned
/// event describes why the transaction was discarded.
pub fn verify_and_commit(
    chain: &mut Chain,
    registry: &IpRegistry,
    mkm: &mut MkmState,
    tx: Transaction<'_>,
    scope: SignatureScope,
) -> Result<Committed, AuditEvent> {
    let b = tx.block;
    precheck(chain, registry, mkm, &tx, scope)
        .map_err(|r| AuditEvent::rejected(b.timestamp_ns, r, b.source))?;

    chain.append(b);
    let grant = GrantToken::new(b.index, b.op, b.key_id, b.dest, b.data_commitment);
    let committed = match tx.intent {
        Intent::Write {
            key_type,
            destroy_on_read,
        } => {
            let record = KeyRecord::new(
                b.key_id,
                key_type,
                Zeroizing::new(tx.data.to_vec()),
                b.timestamp_ns,
                destroy_on_read,
            )
            .and_then(|r| mkm.write(r, Some(grant)));
            Committed::Written {
                block_index: b.index,
                key_id: expect_granted(record),
            }
        }
        Intent::Read { key_use } => {
            let key_type = mkm.get(b.key_id).map(|r| r.key_type());
            let value = expect_granted(mkm.read(b.key_id, key_use, Some(grant)));
            Committed::Read {
                block_index: b.index,
                granted: GrantedRead::new(b.key_id, key_type.unwrap(), b.dest, value),
            }
        }
    };
    Ok(committed)
}

fn expect_granted<T>(r: Result<T, CoreError>) -> T {
    r.unwrap_or_else(|e| panic!("MKM refused an access the checker had cleared: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cores::{KeyType, KeyUse};
    use crate::ledger::fixtures::Ledger;
    use crate::sim::impostor_key;

    fn pm_block(l: &mut Ledger, id: u64) -> Block {
        l.compose(BlockOp::Write, SourceAddr::Rng, DestAddr::Buff, id, &[5; 48])
    }

    fn pm_intent() -> Intent {
        Intent::Write {
            key_type: KeyType::PreMaster,
            destroy_on_read: true,
        }
    }

    fn reject(l: &mut Ledger, b: Block, data: &[u8], intent: Intent) -> RejectReason {
        let before = (persist(&l.chain), l.mkm.fingerprint());
        let ev = l.submit(b, data, intent).unwrap_err();
        assert_eq!((persist(&l.chain), l.mkm.fingerprint()), before, "rejection mutated state");
        ev.reject_reason().unwrap()
    }

    fn persist(c: &Chain) -> Vec<u8> {
        crate::ledger::persist_chain(c)
    }

    #[test]
    fn honest_write_is_granted() {
        let mut l = Ledger::new();
        let c = l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[5; 48]).unwrap();
        assert!(matches!(c, Committed::Written { block_index: 1, key_id: 1 }));
        assert!(l.mkm.contains(1));
        assert_eq!(l.chain.len(), 2);
    }

    #[test]
    fn unregistered_key_is_signature_mismatch() {
        let mut l = Ledger::new();
        let b = pm_block(&mut l, 1);
        let mut signed = b;
        signed.signature = rsa_sign(&b.signed_digest(l.scope), &impostor_key(3)).unwrap();
        assert_eq!(reject(&mut l, signed, &[5; 48], pm_intent()), RejectReason::SignatureMismatch);
    }

    #[test]
    fn other_ip_key_is_signer_mismatch() {
        let mut l = Ledger::new();
        let b = pm_block(&mut l, 1);
        let mut signed = b;
        let genesis = std::sync::Arc::clone(&l.genesis);
        let hash_key = &genesis.signers[&IpId::Hash];
        signed.signature = rsa_sign(&b.signed_digest(l.scope), hash_key).unwrap();
        assert_eq!(
            reject(&mut l, signed, &[5; 48], pm_intent()),
            RejectReason::SignerMismatch(IpId::Hash)
        );
        assert_eq!(
            sign_block(&b, hash_key, l.scope),
            Err(LedgerError::SignerMismatch {
                expected: IpId::Rng,
                actual: IpId::Hash
            })
        );
    }

    #[test]
    fn oversized_signature_is_malformed() {
        let mut l = Ledger::new();
        let mut b = pm_block(&mut l, 1);
        b.signature = crate::crypto::Signature1024([0xff; 128]);
        assert_eq!(reject(&mut l, b, &[5; 48], pm_intent()), RejectReason::MalformedSignature);
    }

    #[test]
    fn stale_pre_hash_is_chain_mismatch() {
        let mut l = Ledger::new();
        let stale = pm_block(&mut l, 2);
        let stale = l.sign(&stale);
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        assert_eq!(reject(&mut l, stale, &[5; 48], pm_intent()), RejectReason::ChainMismatch);
    }

    #[test]
    fn replayed_block_is_chain_mismatch() {
        let mut l = Ledger::new();
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        let old = l.chain.head().to_owned();
        assert_eq!(reject(&mut l, old, &[6; 48], pm_intent()), RejectReason::ChainMismatch);
    }

    #[test]
    fn timestamp_regression() {
        let mut l = Ledger::new();
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        let mut b = pm_block(&mut l, 2);
        b.timestamp_ns = 0;
        let b = l.sign(&b);
        assert_eq!(reject(&mut l, b, &[5; 48], pm_intent()), RejectReason::TimestampRegression);
    }

    #[test]
    fn swapped_data_is_data_mismatch() {
        let mut l = Ledger::new();
        let b = pm_block(&mut l, 1);
        let b = l.sign(&b);
        assert_eq!(reject(&mut l, b, &[6; 48], pm_intent()), RejectReason::DataMismatch);
    }

    #[test]
    fn wrong_length_for_type_is_data_mismatch() {
        let mut l = Ledger::new();
        let b = l.compose(BlockOp::Write, SourceAddr::Hash, DestAddr::Buff, 1, &[5; 48]);
        let b = l.sign(&b);
        let intent = Intent::Write {
            key_type: KeyType::Master,
            destroy_on_read: false,
        };
        assert_eq!(reject(&mut l, b, &[5; 48], intent), RejectReason::DataMismatch);
    }

    #[test]
    fn intent_must_match_op() {
        let mut l = Ledger::new();
        let b = pm_block(&mut l, 1);
        let b = l.sign(&b);
        let intent = Intent::Read {
            key_use: KeyUse::Derivation,
        };
        assert_eq!(reject(&mut l, b, &[5; 48], intent), RejectReason::IntentMismatch);
    }

    #[test]
    fn duplicate_key_id() {
        let mut l = Ledger::new();
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        let b = pm_block(&mut l, 1);
        let b = l.sign(&b);
        assert_eq!(reject(&mut l, b, &[5; 48], pm_intent()), RejectReason::DuplicateKeyId);
    }

    #[test]
    fn read_checks_type_and_existence() {
        let mut l = Ledger::new();
        l.lifecycle();
        // Master persists and is not an encryption key.
        let b = l.compose(BlockOp::Read, SourceAddr::Buff, DestAddr::EnKey, 2, &[]);
        let b = l.sign(&b);
        let enc = Intent::Read {
            key_use: KeyUse::Encryption,
        };
        assert_eq!(reject(&mut l, b, &[], enc), RejectReason::KeyTypeMismatch);
        // Session key 3 was consumed by the lifecycle.
        let b = l.compose(BlockOp::Read, SourceAddr::Buff, DestAddr::EnKey, 3, &[]);
        let b = l.sign(&b);
        assert_eq!(reject(&mut l, b, &[], enc), RejectReason::KeyNotFound);
        let b = l.compose(BlockOp::Read, SourceAddr::Buff, DestAddr::EnKey, 99, &[]);
        let b = l.sign(&b);
        assert_eq!(reject(&mut l, b, &[], enc), RejectReason::KeyNotFound);
    }

    #[test]
    fn read_port_must_match_use() {
        let mut l = Ledger::new();
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        // Derivation use, but the block asks for delivery to the AES port.
        let b = l.compose(BlockOp::Read, SourceAddr::Buff, DestAddr::EnKey, 1, &[]);
        let b = l.sign(&b);
        let intent = Intent::Read {
            key_use: KeyUse::Derivation,
        };
        assert_eq!(reject(&mut l, b, &[], intent), RejectReason::KeyTypeMismatch);
    }

    #[test]
    fn granted_read_returns_the_value_once() {
        let mut l = Ledger::new();
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        let Committed::Read { granted, .. } = l.read(1, KeyUse::Derivation).unwrap() else {
            panic!("expected a read");
        };
        assert_eq!(granted.value(), &[6; 48][..]);
        assert_eq!(granted.dest(), DestAddr::HashKey);
        assert!(l.mkm.get(1).unwrap().destroyed());
        assert_eq!(
            l.read(1, KeyUse::Derivation).unwrap_err().reject_reason(),
            Some(RejectReason::KeyNotFound)
        );
    }

    #[test]
    fn compose_rejects_empty_write_and_genesis() {
        let c = Chain::new();
        let mut req = BlockRequest {
            op: BlockOp::Write,
            source: SourceAddr::Rng,
            dest: DestAddr::Buff,
            key_id: 1,
            data: &[],
            status: 0,
            timestamp_ns: 0,
        };
        assert_eq!(compose_block(&c, &req), Err(LedgerError::EmptyBuffer));
        req.op = BlockOp::Genesis;
        req.data = &[1];
        assert_eq!(compose_block(&c, &req), Err(LedgerError::NoRequestee));
    }

    #[test]
    fn composed_block_links_to_head() {
        let mut l = Ledger::new();
        l.write(SourceAddr::Rng, 1, KeyType::PreMaster, &[6; 48]).unwrap();
        let b = pm_block(&mut l, 2);
        assert_eq!(b.index, 2);
        assert_eq!(b.pre_hash, l.chain.head_hash());
        assert_eq!(b.signature, Default::default());
    }

    #[test]
    fn reason_codes_are_stable() {
        assert_eq!(RejectReason::SignerMismatch(IpId::Rng).code(), "signer_mismatch");
        assert_eq!(RejectReason::ChainMismatch.code(), "chain_mismatch");
        assert_eq!(RejectReason::KeyTypeMismatch.code(), "key_type_mismatch");
    }
}
