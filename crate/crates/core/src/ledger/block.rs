use crate::cores::{DestAddr, SourceAddr};
use crate::crypto::{keccak_digest, keccak_digest_parts, Digest512, Signature1024};

/// Length of one serialised block record.
pub const RECORD_LEN: usize = 8 + 8 + 1 + 1 + 1 + 1 + 4 + 8 + 64 + 64 + 128;

const SIG_OFFSET: usize = RECORD_LEN - 128;

/// Prefix hashed in front of the data portion to form its commitment.
///
/// Session keys are slices of Keccak(master), so an untagged commitment of
/// the master write would publish them on the chain.
pub const COMMIT_TAG: &[u8] = b"BCKM/data";

/// Input to the commitment hash: tag followed by the data portion.
pub fn commitment_preimage(data: &[u8]) -> Vec<u8> {
    [COMMIT_TAG, data].concat()
}

/// Commitment stored in a block in place of the data it covers.
pub fn commit_data(data: &[u8]) -> Digest512 {
    keccak_digest_parts(&[COMMIT_TAG, data])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum BlockOp {
    Read = 0x00,
    Write = 0x01,
    Genesis = 0xFF,
}

impl BlockOp {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x00 => Some(Self::Read),
            0x01 => Some(Self::Write),
            0xFF => Some(Self::Genesis),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Read => "read",
            Self::Write => "write",
            Self::Genesis => "genesis",
        }
    }
}

/// What the block signature covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignatureScope {
    /// Digest of the whole record with the signature field zeroed.
    #[default]
    FullBlock,
    /// Only the data commitment. Timestamp, status and IDs are then protected
    /// solely by the successor's pre-hash.
    DataOnly,
}

impl SignatureScope {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" | "full-block" => Some(Self::FullBlock),
            "data-only" => Some(Self::DataOnly),
            _ => None,
        }
    }
}

/// One audited key transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub index: u64,
    pub timestamp_ns: u64,
    pub op: BlockOp,
    pub source: SourceAddr,
    pub dest: DestAddr,
    pub status: u32,
    pub key_id: u64,
    pub data_commitment: Digest512,
    pub pre_hash: Digest512,
    pub signature: Signature1024,
}

impl Block {
    pub fn genesis() -> Self {
        Self {
            index: 0,
            timestamp_ns: 0,
            op: BlockOp::Genesis,
            source: SourceAddr::Rng,
            dest: DestAddr::Buff,
            status: 0,
            key_id: 0,
            data_commitment: Digest512::ZERO,
            pre_hash: Digest512::ZERO,
            signature: Signature1024::ZERO,
        }
    }

    /// Big-endian wire record.
    pub fn to_record(&self) -> [u8; RECORD_LEN] {
        let mut r = [0u8; RECORD_LEN];
        r[0..8].copy_from_slice(&self.index.to_be_bytes());
        r[8..16].copy_from_slice(&self.timestamp_ns.to_be_bytes());
        r[16] = self.op as u8;
        r[17] = self.source.bits();
        r[18] = self.dest.bits();
        r[19] = 0;
        r[20..24].copy_from_slice(&self.status.to_be_bytes());
        r[24..32].copy_from_slice(&self.key_id.to_be_bytes());
        r[32..96].copy_from_slice(&self.data_commitment.0);
        r[96..160].copy_from_slice(&self.pre_hash.0);
        r[SIG_OFFSET..].copy_from_slice(&self.signature.0);
        r
    }

    /// Parses a record. Fails on out-of-range enum bytes or a non-zero
    /// reserved byte.
    pub fn from_record(r: &[u8]) -> Result<Self, String> {
        if r.len() != RECORD_LEN {
            return Err(format!("record of {} bytes", r.len()));
        }
        let u64_at = |o: usize| u64::from_be_bytes(r[o..o + 8].try_into().unwrap());
        let op = BlockOp::from_byte(r[16]).ok_or_else(|| format!("bad op byte {:#04x}", r[16]))?;
        let source =
            SourceAddr::from_bits(r[17]).ok_or_else(|| format!("bad source byte {:#04x}", r[17]))?;
        let dest = DestAddr::from_bits(r[18]).ok_or_else(|| format!("bad dest byte {:#04x}", r[18]))?;
        if r[19] != 0 {
            return Err(format!("reserved byte is {:#04x}", r[19]));
        }
        let mut data_commitment = [0u8; 64];
        data_commitment.copy_from_slice(&r[32..96]);
        let mut pre_hash = [0u8; 64];
        pre_hash.copy_from_slice(&r[96..160]);
        let mut signature = [0u8; 128];
        signature.copy_from_slice(&r[SIG_OFFSET..]);
        Ok(Self {
            index: u64_at(0),
            timestamp_ns: u64_at(8),
            op,
            source,
            dest,
            status: u32::from_be_bytes(r[20..24].try_into().unwrap()),
            key_id: u64_at(24),
            data_commitment: Digest512(data_commitment),
            pre_hash: Digest512(pre_hash),
            signature: Signature1024(signature),
        })
    }

    /// The record with the signature field zeroed.
    pub fn preimage_record(&self) -> [u8; RECORD_LEN] {
        let mut r = self.to_record();
        r[SIG_OFFSET..].fill(0);
        r
    }

    /// Digest the requestee signs.
    pub fn signed_digest(&self, scope: SignatureScope) -> Digest512 {
        match scope {
            SignatureScope::FullBlock => keccak_digest(&self.preimage_record()),
            SignatureScope::DataOnly => self.data_commitment,
        }
    }

    /// Digest of the full record; the next block's pre-hash.
    pub fn hash(&self) -> Digest512 {
        keccak_digest(&self.to_record())
    }
}
