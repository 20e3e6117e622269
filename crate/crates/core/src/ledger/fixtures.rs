//! Test helpers: honest transactions against a seeded genesis.

use std::sync::Arc;

use super::{
    compose_block, sign_block, verify_and_commit, AuditEvent, Block, BlockOp, BlockRequest, Chain,
    Committed, IpRegistry, SignatureScope, Transaction,
};
use crate::cores::{DestAddr, Intent, KeyType, KeyUse, MkmState, SourceAddr};
use crate::sim::Genesis;

pub struct Ledger {
    pub genesis: Arc<Genesis>,
    pub registry: IpRegistry,
    pub chain: Chain,
    pub mkm: MkmState,
    pub scope: SignatureScope,
    pub now: u64,
}

impl Ledger {
    pub fn new() -> Self {
        let genesis = Genesis::cached(1);
        Self {
            registry: genesis.registry(),
            genesis,
            chain: Chain::new(),
            mkm: MkmState::default(),
            scope: SignatureScope::FullBlock,
            now: 0,
        }
    }

    pub fn tick(&mut self) -> u64 {
        self.now += 100;
        self.now
    }

    pub fn compose(&mut self, op: BlockOp, source: SourceAddr, dest: DestAddr, key_id: u64, data: &[u8]) -> Block {
        let ts = self.tick();
        compose_block(
            &self.chain,
            &BlockRequest {
                op,
                source,
                dest,
                key_id,
                data,
                status: 0,
                timestamp_ns: ts,
            },
        )
        .unwrap()
    }

    /// Signs with the requestee's genesis key.
    pub fn sign(&self, b: &Block) -> Block {
        let who = super::requestee(b).unwrap();
        sign_block(b, &self.genesis.signers[&who], self.scope).unwrap()
    }

    pub fn submit(&mut self, block: Block, data: &[u8], intent: Intent) -> Result<Committed, AuditEvent> {
        verify_and_commit(
            &mut self.chain,
            &self.registry,
            &mut self.mkm,
            Transaction { block, data, intent },
            self.scope,
        )
    }

    pub fn write(&mut self, source: SourceAddr, key_id: u64, key_type: KeyType, data: &[u8]) -> Result<Committed, AuditEvent> {
        let b = self.compose(BlockOp::Write, source, DestAddr::Buff, key_id, data);
        let b = self.sign(&b);
        self.submit(
            b,
            data,
            Intent::Write {
                key_type,
                destroy_on_read: crate::cores::DestructionPolicy::default().destroy_on_read(key_type),
            },
        )
    }

    pub fn read(&mut self, key_id: u64, key_use: KeyUse) -> Result<Committed, AuditEvent> {
        let b = self.compose(BlockOp::Read, SourceAddr::Buff, key_use.port(), key_id, &[]);
        let b = self.sign(&b);
        self.submit(b, &[], Intent::Read { key_use })
    }

    /// Pre-master, master and four session keys, with every read a normal
    /// run performs. Produces 12 transaction blocks.
    pub fn lifecycle(&mut self) {
        let w = |l: &mut Self, src, id, t: KeyType, fill: u8| {
            l.write(src, id, t, &vec![fill; t.value_len()]).unwrap();
        };
        w(self, SourceAddr::Rng, 1, KeyType::PreMaster, 1);
        self.read(1, KeyUse::Derivation).unwrap();
        w(self, SourceAddr::Hash, 2, KeyType::Master, 2);
        self.read(2, KeyUse::Derivation).unwrap();
        w(self, SourceAddr::Hash, 3, KeyType::Encryption, 3);
        w(self, SourceAddr::Hash, 4, KeyType::Encryption, 4);
        w(self, SourceAddr::Hash, 5, KeyType::ClientMac, 5);
        w(self, SourceAddr::Hash, 6, KeyType::ServerMac, 6);
        self.read(3, KeyUse::Encryption).unwrap();
        self.read(4, KeyUse::Encryption).unwrap();
        self.read(5, KeyUse::Mac).unwrap();
        self.read(6, KeyUse::Mac).unwrap();
    }
}
