use std::fmt;

use super::block::{Block, BlockOp, SignatureScope};
use super::registry::{requestee, IpRegistry};
use crate::crypto::{rsa_verify, Digest512};

/// Append-only hash-linked sequence of blocks, starting at genesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
    head_hash: Digest512,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        let g = Block::genesis();
        Self {
            head_hash: g.hash(),
            blocks: vec![g],
        }
    }

    /// Rebuilds a chain from stored blocks without checking them; run
    /// [`verify_chain`] before trusting the result.
    pub(crate) fn from_blocks(blocks: Vec<Block>) -> Self {
        assert!(!blocks.is_empty());
        Self {
            head_hash: blocks.last().unwrap().hash(),
            blocks,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn head_hash(&self) -> Digest512 {
        self.head_hash
    }

    /// Transaction blocks (everything after genesis).
    pub fn transactions(&self) -> &[Block] {
        &self.blocks[1..]
    }

    pub(crate) fn append(&mut self, block: Block) {
        debug_assert_eq!(block.index as usize, self.blocks.len());
        self.head_hash = block.hash();
        self.blocks.push(block);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainCheck {
    Genesis,
    Index,
    Op,
    Linkage,
    Signature,
    Timestamp,
}

impl fmt::Display for ChainCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Genesis => "genesis",
            Self::Index => "index",
            Self::Op => "op",
            Self::Linkage => "pre-hash linkage",
            Self::Signature => "signature",
            Self::Timestamp => "timestamp monotonicity",
        })
    }
}

/// First failing block and which check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainFault {
    pub index: usize,
    pub check: ChainCheck,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {} fails {} check", self.index, self.check)
    }
}

impl std::error::Error for ChainFault {}

/// Checks genesis, then for every later block: index, op, pre-hash linkage,
/// signature under the requestee's registered key, and timestamp order.
pub fn verify_chain(
    chain: &Chain,
    registry: &IpRegistry,
    scope: SignatureScope,
) -> Result<(), ChainFault> {
    let blocks = chain.blocks();
    let fault = |index, check| Err(ChainFault { index, check });
    if blocks.first() != Some(&Block::genesis()) {
        return fault(0, ChainCheck::Genesis);
    }
    for (i, pair) in blocks.windows(2).enumerate() {
        let (prev, b) = (&pair[0], &pair[1]);
        let i = i + 1;
        if b.index != i as u64 {
            return fault(i, ChainCheck::Index);
        }
        if b.op == BlockOp::Genesis {
            return fault(i, ChainCheck::Op);
        }
        if b.pre_hash != prev.hash() {
            return fault(i, ChainCheck::Linkage);
        }
        let signed_ok = requestee(b)
            .and_then(|ip| registry.get(ip))
            .and_then(|pk| rsa_verify(&b.signature, pk).ok())
            .is_some_and(|d| d == b.signed_digest(scope));
        if !signed_ok {
            return fault(i, ChainCheck::Signature);
        }
        if b.timestamp_ns < prev.timestamp_ns {
            return fault(i, ChainCheck::Timestamp);
        }
    }
    Ok(())
}
