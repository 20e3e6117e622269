use std::collections::BTreeMap;

use super::block::{Block, BlockOp};
use crate::cores::IpId;
use crate::crypto::RsaPublicKey;

/// Public keys of every IP allowed to request MKM transactions. Fixed at
/// genesis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IpRegistry {
    keys: BTreeMap<IpId, RsaPublicKey>,
}

impl IpRegistry {
    pub fn new(keys: BTreeMap<IpId, RsaPublicKey>) -> Self {
        Self { keys }
    }

    pub fn get(&self, ip: IpId) -> Option<&RsaPublicKey> {
        self.keys.get(&ip)
    }

    pub fn iter(&self) -> impl Iterator<Item = (IpId, &RsaPublicKey)> {
        self.keys.iter().map(|(k, v)| (*k, v))
    }
}

/// The IP whose signature authorises `block`.
///
/// A write is requested by the core producing the data (the source
/// address). A read is requested by the core that will consume the key,
/// i.e. the owner of the destination port.
pub fn requestee(block: &Block) -> Option<IpId> {
    match block.op {
        BlockOp::Write => Some(block.source.owner()),
        BlockOp::Read => Some(block.dest.owner()),
        BlockOp::Genesis => None,
    }
}
