//! IP cores of the security processor and the signals they expose.
//!
//! The processor is partitioned into three memory regions. Shared memory is
//! the only processor-visible region; everything else in this module lives in
//! the crypto or confidential region and is reachable only through the data
//! path controller.

mod buffer;
mod engines;
mod memory;
mod mkm;

use bitflags::bitflags;
use thiserror::Error;

pub use buffer::{BufferPayload, BufferState, GrantedRead, Intent, PendingTx};
pub use engines::{AesCore, DerivedKey, HashCore, HashOutput, LoadedKey, PubEnCore, RngCore};
pub use memory::{contains_secret, SharedMemory, TimerState, TAINT_MIN_LEN};
pub use mkm::{DestructionPolicy, KeyCatalog, KeyMeta, KeyRecord, MkmState};

use crate::crypto::AesError;

/// Input (source) address nibble of the control word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SourceAddr {
    Rng = 0b0000,
    Buff = 0b0001,
    Hash = 0b0010,
    PubEn = 0b0011,
}

impl SourceAddr {
    pub const ALL: [SourceAddr; 4] = [Self::Rng, Self::Buff, Self::Hash, Self::PubEn];

    pub fn from_bits(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    /// Core identity driving this input port.
    pub fn owner(self) -> IpId {
        match self {
            Self::Rng => IpId::Rng,
            Self::Buff => IpId::Buff,
            Self::Hash => IpId::Hash,
            Self::PubEn => IpId::PubEn,
        }
    }
}

/// Output (destination) address nibble of the control word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum DestAddr {
    Buff = 0b0000,
    HashKey = 0b0001,
    EnKey = 0b0010,
    HashIn = 0b0011,
    PubEnIn = 0b0100,
}

impl DestAddr {
    pub const ALL: [DestAddr; 5] = [
        Self::Buff,
        Self::HashKey,
        Self::EnKey,
        Self::HashIn,
        Self::PubEnIn,
    ];

    pub fn from_bits(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    /// Core identity that consumes this output port.
    pub fn owner(self) -> IpId {
        match self {
            Self::Buff => IpId::Buff,
            Self::HashKey | Self::HashIn => IpId::Hash,
            Self::EnKey => IpId::Enc,
            Self::PubEnIn => IpId::PubEn,
        }
    }
}

/// Identity of a crypto IP holding a registered signing keypair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IpId {
    Rng,
    Buff,
    Hash,
    PubEn,
    Enc,
}

impl IpId {
    pub const ALL: [IpId; 5] = [Self::Rng, Self::Buff, Self::Hash, Self::PubEn, Self::Enc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rng => "RNG",
            Self::Buff => "Buff",
            Self::Hash => "Hash",
            Self::PubEn => "PubEn",
            Self::Enc => "Enc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryRegion {
    Processor,
    Crypto,
    Confidential,
}

impl MemoryRegion {
    pub fn pe_accessible(self) -> bool {
        self == MemoryRegion::Processor
    }
}

/// Typed secret held in the master key memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyType {
    PreMaster,
    Master,
    Encryption,
    ClientMac,
    ServerMac,
}

impl KeyType {
    pub const ALL: [KeyType; 5] = [
        Self::PreMaster,
        Self::Master,
        Self::Encryption,
        Self::ClientMac,
        Self::ServerMac,
    ];

    pub fn value_len(self) -> usize {
        match self {
            Self::PreMaster => 48,
            Self::Master => 64,
            Self::Encryption | Self::ClientMac | Self::ServerMac => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PreMaster => "pre-master",
            Self::Master => "master",
            Self::Encryption => "encryption",
            Self::ClientMac => "client-mac",
            Self::ServerMac => "server-mac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// What a read request intends to do with a key. Each use is served through
/// one key port and only accepts particular key types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyUse {
    /// Hash core derives the next key level (pre-master → master → session keys).
    Derivation,
    /// Enc core bulk encryption.
    Encryption,
    /// Hash core keyed digest.
    Mac,
}

impl KeyUse {
    pub fn permits(self, t: KeyType) -> bool {
        match self {
            Self::Derivation => matches!(t, KeyType::PreMaster | KeyType::Master),
            Self::Encryption => t == KeyType::Encryption,
            Self::Mac => matches!(t, KeyType::ClientMac | KeyType::ServerMac),
        }
    }

    pub fn port(self) -> DestAddr {
        match self {
            Self::Derivation | Self::Mac => DestAddr::HashKey,
            Self::Encryption => DestAddr::EnKey,
        }
    }
}

bitflags! {
    /// Core enable bits, laid out as in the low six bits of the control word.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct CoreEnables: u8 {
        const BUFF = 1 << 0;
        const MKM = 1 << 1;
        const ENC = 1 << 2;
        const HASH = 1 << 3;
        const RNG = 1 << 4;
        const RSA = 1 << 5;
    }
}

bitflags! {
    /// Synchronisation signals of the custom bus interconnect.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Signals: u8 {
        const RNG_DONE = 1 << 0;
        const BUFF_RD = 1 << 1;
        const HASH_DONE = 1 << 2;
        const BUFF_RDY = 1 << 3;
        const HASH_KEY_RDY = 1 << 4;
        const EN_KEY_RDY = 1 << 5;
    }
}

/// Snapshot of all enable and ready/done signals.
///
/// Serialised as a 32-bit word: bits [5:0] enables, bits [11:6] signals,
/// everything above zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SystemStatus {
    pub enables: CoreEnables,
    pub signals: Signals,
}

impl SystemStatus {
    pub fn to_word(self) -> u32 {
        u32::from(self.enables.bits()) | (u32::from(self.signals.bits()) << 6)
    }

    pub fn from_word(word: u32) -> Option<Self> {
        if word >> 12 != 0 {
            return None;
        }
        Some(Self {
            enables: CoreEnables::from_bits(word as u8 & 0x3f)?,
            signals: Signals::from_bits((word >> 6) as u8 & 0x3f)?,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("{0} core is not enabled")]
    CoreNotEnabled(&'static str),
    #[error("RNG has not been seeded")]
    NotSeeded,
    #[error("no input staged at the hash core")]
    NoInputStaged,
    #[error("no key loaded at the {0} key port")]
    NoKeyLoaded(&'static str),
    #[error("MKM access without a matching grant")]
    NoGrant,
    #[error("key id {0} already present in MKM")]
    DuplicateKeyId(u64),
    #[error("key id {0} not found or destroyed")]
    KeyNotFound(u64),
    #[error("key {key_id} is {stored:?}, not usable for {requested:?}")]
    KeyTypeMismatch {
        key_id: u64,
        stored: KeyType,
        requested: KeyUse,
    },
    #[error("{key_type:?} key must be {expected} bytes, got {got}")]
    BadKeyLength {
        key_type: KeyType,
        expected: usize,
        got: usize,
    },
    #[error("key material written to processor memory at {addr:#06x}")]
    IsolationViolation { addr: u32 },
    #[error("client/server randoms not staged at the hash core")]
    RandomsNotStaged,
    #[error(transparent)]
    Aes(#[from] AesError),
}

/// All cores of the crypto and confidential areas plus processor memory.
#[derive(Debug)]
pub struct Cores {
    pub rng: RngCore,
    pub hash: HashCore,
    pub aes: AesCore,
    pub puben: PubEnCore,
    pub buffer: BufferState,
    pub mkm: MkmState,
    pub shared: SharedMemory,
    pub timer: TimerState,
}

impl Cores {
    pub fn new(puben: PubEnCore) -> Self {
        Self {
            rng: RngCore::default(),
            hash: HashCore::default(),
            aes: AesCore::default(),
            puben,
            buffer: BufferState::default(),
            mkm: MkmState::default(),
            shared: SharedMemory::default(),
            timer: TimerState::default(),
        }
    }

    /// Ready/done signals derived from the current core state.
    pub fn signals(&self) -> Signals {
        let mut s = Signals::empty();
        s.set(Signals::RNG_DONE, self.rng.output().is_some());
        s.set(Signals::HASH_DONE, self.hash.output().is_some());
        s.set(Signals::BUFF_RDY, self.buffer.payload().is_some());
        s.set(Signals::BUFF_RD, self.buffer.granted().is_some());
        s.set(Signals::HASH_KEY_RDY, self.hash.key().is_some());
        s.set(Signals::EN_KEY_RDY, self.aes.key().is_some());
        s
    }

    /// Every key value currently alive anywhere outside processor memory.
    pub fn live_secrets(&self) -> Vec<&[u8]> {
        let mut out: Vec<&[u8]> = self.mkm.live_values().collect();
        if let Some(r) = self.rng.output() {
            out.push(r);
        }
        if let Some(p) = self.buffer.payload() {
            out.push(p.bytes());
        }
        if let Some(g) = self.buffer.granted() {
            out.push(g.value());
        }
        out.extend(self.buffer.staged().iter().map(|k| k.value()));
        if let Some(k) = self.hash.key() {
            out.push(k.value());
        }
        if let Some(HashOutput::Keys(keys)) = self.hash.output() {
            out.extend(keys.iter().map(|k| k.value()));
        }
        if let Some(k) = self.aes.key() {
            out.push(k.bytes());
        }
        out
    }

    /// Scans processor memory for any live key value.
    pub fn taint_scan(&self) -> Option<u32> {
        self.shared.scan(&self.live_secrets())
    }

    /// Writes to processor memory after checking the bytes against live keys.
    pub fn pe_write(&mut self, addr: u32, bytes: Vec<u8>) -> Result<(), CoreError> {
        let secrets: Vec<Vec<u8>> = self.live_secrets().into_iter().map(<[u8]>::to_vec).collect();
        let refs: Vec<&[u8]> = secrets.iter().map(Vec::as_slice).collect();
        self.shared.write(addr, bytes, &refs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_encodings() {
        assert_eq!(SourceAddr::from_bits(0), Some(SourceAddr::Rng));
        assert_eq!(SourceAddr::from_bits(3), Some(SourceAddr::PubEn));
        assert_eq!(SourceAddr::from_bits(4), None);
        assert_eq!(DestAddr::from_bits(4), Some(DestAddr::PubEnIn));
        assert_eq!(DestAddr::from_bits(5), None);
        for d in DestAddr::ALL {
            assert_eq!(DestAddr::from_bits(d.bits()), Some(d));
        }
    }

    #[test]
    fn status_word_is_twelve_bits_wide() {
        let s = SystemStatus {
            enables: CoreEnables::all(),
            signals: Signals::all(),
        };
        assert_eq!(s.to_word(), 0x0fff);
        assert_eq!(SystemStatus::from_word(0x0fff), Some(s));
        assert_eq!(SystemStatus::from_word(0x1000), None);
        let only = SystemStatus {
            enables: CoreEnables::RNG,
            signals: Signals::RNG_DONE,
        };
        assert_eq!(only.to_word(), 0x10 | 0x40);
    }

    #[test]
    fn key_use_permissions() {
        assert!(KeyUse::Derivation.permits(KeyType::PreMaster));
        assert!(KeyUse::Derivation.permits(KeyType::Master));
        assert!(!KeyUse::Derivation.permits(KeyType::Encryption));
        assert!(KeyUse::Encryption.permits(KeyType::Encryption));
        assert!(!KeyUse::Encryption.permits(KeyType::ClientMac));
        assert!(!KeyUse::Mac.permits(KeyType::Encryption));
        assert_eq!(KeyUse::Encryption.port(), DestAddr::EnKey);
    }

    #[test]
    fn only_processor_region_is_pe_accessible() {
        assert!(MemoryRegion::Processor.pe_accessible());
        assert!(!MemoryRegion::Crypto.pe_accessible());
        assert!(!MemoryRegion::Confidential.pe_accessible());
    }
}
