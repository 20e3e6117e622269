//! The whole-processor simulator: cores, chain, registry and audit log
//! advanced one instruction at a time.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::cores::{
    CoreEnables, Cores, DestructionPolicy, Intent, IpId, KeyType, KeyUse, MkmState, PendingTx,
    PubEnCore, SystemStatus,
};
use crate::crypto::{keccak_digest_parts, rsa_keygen, Digest512, DrbgState, RsaKeyPair};
use crate::datapath::ExecError;
use crate::harness::LatencyModel;
use crate::ledger::{
    load_chain, persist_chain, verify_chain, AuditEvent, BlockOp, Chain, ChainFault, DumpError,
    IpRegistry, SignatureScope,
};

/// Shared-memory map used by the processor-path instructions.
pub mod addr {
    pub const EN_RND: u32 = 0x0100;
    pub const RANDOMS: u32 = 0x0200;
    pub const PLAINTEXT: u32 = 0x0300;
    pub const CIPHERTEXT: u32 = 0x0400;
    pub const MESSAGE: u32 = 0x0500;
    pub const DIGEST: u32 = 0x0600;
    pub const CHAIN_DUMP: u32 = 0x1000;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub latency: LatencyModel,
    pub policy: DestructionPolicy,
    pub scope: SignatureScope,
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            latency: LatencyModel::default(),
            policy: DestructionPolicy::default(),
            scope: SignatureScope::default(),
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

/// Offline-generated key material: one signing keypair per IP plus the
/// remote server's keypair.
#[derive(Debug)]
pub struct Genesis {
    pub signers: BTreeMap<IpId, RsaKeyPair>,
    pub server: RsaKeyPair,
}

impl Genesis {
    pub fn generate(seed: u64) -> Self {
        let mut drbg = DrbgState::from_u64("genesis", seed);
        let signers = IpId::ALL
            .into_iter()
            .map(|ip| (ip, rsa_keygen(&mut drbg, ip)))
            .collect();
        // The server is no IP; its keypair carries an arbitrary owner label.
        let server = rsa_keygen(&mut drbg, IpId::PubEn);
        Self { signers, server }
    }

    /// Keygen is the slow part of a run, so genesis sets are shared per seed.
    pub fn cached(seed: u64) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Genesis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(g) = cache.lock().unwrap().get(&seed) {
            return Arc::clone(g);
        }
        let g = Arc::new(Self::generate(seed));
        Arc::clone(cache.lock().unwrap().entry(seed).or_insert(g))
    }

    pub fn registry(&self) -> IpRegistry {
        IpRegistry::new(
            self.signers
                .iter()
                .map(|(ip, k)| (*ip, k.public().clone()))
                .collect(),
        )
    }
}

/// A signing key no registry has seen, derived from `seed`.
pub fn impostor_key(seed: u64) -> RsaKeyPair {
    rsa_keygen(&mut DrbgState::from_u64("impostor", seed), IpId::PubEn)
}

#[derive(Debug)]
pub struct Simulator {
    config: SimConfig,
    genesis: Arc<Genesis>,
    pub(crate) cores: Cores,
    pub(crate) chain: Chain,
    pub(crate) registry: IpRegistry,
    pub(crate) events: Vec<AuditEvent>,
    pub(crate) enables: CoreEnables,
    pub(crate) next_key_id: u64,
    pub(crate) pe_drbg: DrbgState,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        let genesis = Genesis::cached(config.seed);
        let registry = genesis.registry();
        let cores = Cores::new(PubEnCore::new(genesis.signers.clone()));
        Self {
            pe_drbg: DrbgState::from_u64("pe", config.seed),
            config,
            genesis,
            cores,
            chain: Chain::new(),
            registry,
            events: Vec::new(),
            enables: CoreEnables::empty(),
            next_key_id: 1,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn genesis(&self) -> &Genesis {
        &self.genesis
    }

    pub fn cores(&self) -> &Cores {
        &self.cores
    }

    pub fn mkm(&self) -> &MkmState {
        &self.cores.mkm
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn registry(&self) -> &IpRegistry {
        &self.registry
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn now_ps(&self) -> u64 {
        self.cores.timer.now_ps()
    }

    pub fn now_ns(&self) -> u64 {
        self.cores.timer.now_ns()
    }

    /// Enables of the last decoded control word plus live signals.
    pub fn status(&self) -> SystemStatus {
        SystemStatus {
            enables: self.enables,
            signals: self.cores.signals(),
        }
    }

    /// Digest over the chain dump and the MKM contents.
    pub fn state_hash(&self) -> Digest512 {
        keccak_digest_parts(&[&persist_chain(&self.chain), self.cores.mkm.fingerprint().as_bytes()])
    }

    pub fn verify_chain(&self) -> Result<(), ChainFault> {
        verify_chain(&self.chain, &self.registry, self.config.scope)
    }

    /// Next signature will be made with `key` instead of the requestee's.
    pub fn install_impostor(&mut self, key: RsaKeyPair) {
        self.cores.puben.install_impostor(key);
    }

    /// Persists the chain into processor memory, as the PE does for audit.
    pub fn dump_chain(&mut self) -> Result<(), ExecError> {
        let bytes = persist_chain(&self.chain);
        self.cores.pe_write(addr::CHAIN_DUMP, bytes)?;
        Ok(())
    }

    pub fn chain_dump(&self) -> Option<&[u8]> {
        self.cores.shared.read(addr::CHAIN_DUMP)
    }

    /// Processor memory is writable by the PE, and so by an attacker on it.
    pub fn chain_dump_mut(&mut self) -> Option<&mut Vec<u8>> {
        self.cores.shared.get_mut(addr::CHAIN_DUMP)
    }

    /// Loads and verifies the dump held in processor memory.
    pub fn verify_chain_dump(&self) -> Result<(), DumpCheckError> {
        let bytes = self.chain_dump().ok_or(DumpCheckError::NoDump)?;
        let chain = load_chain(bytes)?;
        verify_chain(&chain, &self.registry, self.config.scope)?;
        Ok(())
    }

    /// Re-stages an already committed block as the pending transaction.
    pub fn replay_block(&mut self, index: u64) -> Result<(), ExecError> {
        let block = *self
            .chain
            .transactions()
            .iter()
            .find(|b| b.index == index)
            .ok_or_else(|| ExecError::BadOperand(format!("no transaction block {index}")))?;
        if self.cores.buffer.pending().is_some() {
            return Err(ExecError::PreconditionViolated("a transaction is already pending".into()));
        }
        let rec = self.cores.mkm.get(block.key_id);
        let intent = match block.op {
            BlockOp::Write => {
                let t = rec.map_or(KeyType::PreMaster, |r| r.key_type());
                Intent::Write {
                    key_type: t,
                    destroy_on_read: self.config.policy.destroy_on_read(t),
                }
            }
            _ => {
                let t = rec.map(|r| r.key_type());
                let key_use = match (block.dest, t) {
                    (crate::cores::DestAddr::EnKey, _) => KeyUse::Encryption,
                    (_, Some(KeyType::ClientMac | KeyType::ServerMac)) => KeyUse::Mac,
                    _ => KeyUse::Derivation,
                };
                Intent::Read { key_use }
            }
        };
        let mut unsigned = block;
        unsigned.signature = Default::default();
        self.cores.buffer.set_pending(PendingTx {
            block: unsigned,
            intent,
            digest: None,
            signature: Some(block.signature),
        });
        Ok(())
    }

    pub(crate) fn warn(&mut self, msg: String) {
        self.events.push(AuditEvent::warning(self.cores.timer.now_ns(), msg));
    }

    pub(crate) fn take_key_id(&mut self) -> u64 {
        let id = self.next_key_id;
        self.next_key_id += 1;
        id
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DumpCheckError {
    #[error("no chain dump in processor memory")]
    NoDump,
    #[error(transparent)]
    Malformed(#[from] DumpError),
    #[error("chain verification failed: {0}")]
    Fault(#[from] ChainFault),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapath::{program, run_program};

    #[test]
    fn genesis_is_seeded() {
        let a = Genesis::cached(5);
        let b = Genesis::generate(5);
        assert_eq!(a.server.public(), b.server.public());
        assert_eq!(a.signers.len(), IpId::ALL.len());
        assert_ne!(Genesis::cached(6).server.public(), b.server.public());
        assert!(Arc::ptr_eq(&a, &Genesis::cached(5)));
        assert_ne!(impostor_key(5).public(), a.signers[&IpId::Rng].public());
    }

    #[test]
    fn dump_roundtrip_in_processor_memory() {
        let mut s = Simulator::new(SimConfig::with_seed(1));
        assert!(matches!(s.verify_chain_dump(), Err(DumpCheckError::NoDump)));
        run_program(&mut s, &program(&[1, 2, 3, 17, 18, 19, 20, 21]).unwrap()).unwrap();
        s.dump_chain().unwrap();
        assert!(s.verify_chain_dump().is_ok());
        let d = s.chain_dump_mut().unwrap();
        let last = d.len() - 1;
        d[last] ^= 1;
        assert!(matches!(s.verify_chain_dump(), Err(DumpCheckError::Fault(_))));
        s.chain_dump_mut().unwrap().truncate(10);
        assert!(matches!(s.verify_chain_dump(), Err(DumpCheckError::Malformed(_))));
    }

    #[test]
    fn replay_needs_an_existing_block() {
        let mut s = Simulator::new(SimConfig::with_seed(1));
        assert_eq!(s.replay_block(1).unwrap_err().to_string(), "bad operand: no transaction block 1");
    }

    #[test]
    fn key_ids_are_monotonic() {
        let mut s = Simulator::new(SimConfig::with_seed(1));
        assert_eq!((s.take_key_id(), s.take_key_id()), (1, 2));
    }
}
