//! Chain dump written to processor-visible memory.
//!
//! Layout (big-endian): `"BCKM"`, version `u16 = 1`, block count `u32`,
//! followed by one fixed-size record per block. Blocks only carry a digest
//! commitment of their data, so the dump never contains key bytes.

use thiserror::Error;

use super::block::{Block, RECORD_LEN};
use super::chain::Chain;

pub const MAGIC: &[u8; 4] = b"BCKM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DumpError {
    #[error("malformed chain dump: {0}")]
    MalformedDump(String),
}

fn malformed(msg: impl Into<String>) -> DumpError {
    DumpError::MalformedDump(msg.into())
}

pub fn persist_chain(chain: &Chain) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + chain.len() * RECORD_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    out.extend_from_slice(&(chain.len() as u32).to_be_bytes());
    for b in chain.blocks() {
        out.extend_from_slice(&b.to_record());
    }
    out
}

pub fn load_chain(bytes: &[u8]) -> Result<Chain, DumpError> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let version = u16::from_be_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let count = u32::from_be_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if count == 0 {
        return Err(malformed("no genesis block"));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != count.saturating_mul(RECORD_LEN) {
        return Err(malformed(format!(
            "{count} blocks declared, {} body bytes present",
            body.len()
        )));
    }
    let blocks = body
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, r)| Block::from_record(r).map_err(|e| malformed(format!("block {i}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Chain::from_blocks(blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genesis_only_roundtrip() {
        let c = Chain::new();
        let bytes = persist_chain(&c);
        assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN);
        assert_eq!(&bytes[..10], b"BCKM\x00\x01\x00\x00\x00\x01");
        assert_eq!(load_chain(&bytes).unwrap(), c);
    }

    #[test]
    fn truncation_and_bad_header_rejected() {
        let bytes = persist_chain(&Chain::new());
        assert!(load_chain(&bytes[..bytes.len() - 1]).is_err());
        assert!(load_chain(&bytes[..5]).is_err());
        let mut bad = bytes.clone();
        bad[0] ^= 1;
        assert!(matches!(load_chain(&bad), Err(DumpError::MalformedDump(_))));
        let mut bad = bytes.clone();
        bad[5] = 2;
        assert!(load_chain(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(load_chain(&extra).is_err());
    }
}
