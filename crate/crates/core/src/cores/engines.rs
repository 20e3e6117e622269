use std::collections::BTreeMap;

use zeroize::Zeroizing;

use super::{CoreError, IpId, KeyType};
use crate::crypto::{
    aes_encrypt, keccak_digest, keccak_digest_parts, rsa_sign, Digest512, DrbgState, RsaKeyPair,
    RsaPublicKey, Signature1024, SymmetricKey,
};

fn gate(enabled: bool, name: &'static str) -> Result<(), CoreError> {
    if enabled {
        Ok(())
    } else {
        Err(CoreError::CoreNotEnabled(name))
    }
}

#[derive(Debug, Default)]
pub struct RngCore {
    drbg: Option<DrbgState>,
    output: Option<Zeroizing<Vec<u8>>>,
}

impl RngCore {
    pub fn reseed(&mut self, material: &[u8]) {
        self.drbg = Some(DrbgState::from_material(material));
    }

    pub fn is_seeded(&self) -> bool {
        self.drbg.is_some()
    }

    /// Draws 384 bits into the output port and raises RNG_done.
    pub fn generate(&mut self, enabled: bool) -> Result<&[u8], CoreError> {
        gate(enabled, "RNG")?;
        let drbg = self.drbg.as_mut().ok_or(CoreError::NotSeeded)?;
        let out = self.output.insert(Zeroizing::new(drbg.next_384().to_vec()));
        Ok(out.as_slice())
    }

    pub fn output(&self) -> Option<&[u8]> {
        self.output.as_deref().map(Vec::as_slice)
    }

    pub fn take_output(&mut self) -> Option<Zeroizing<Vec<u8>>> {
        self.output.take()
    }
}

/// A typed key value travelling between the buffer and a key port.
pub struct DerivedKey {
    key_type: KeyType,
    value: Zeroizing<Vec<u8>>,
}

pub type LoadedKey = DerivedKey;

impl std::fmt::Debug for DerivedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DerivedKey({:?}, <redacted>)", self.key_type)
    }
}

impl DerivedKey {
    pub fn new(key_type: KeyType, value: Zeroizing<Vec<u8>>) -> Self {
        Self { key_type, value }
    }

    pub fn key_type(&self) -> KeyType {
        self.key_type
    }

    pub fn value(&self) -> &[u8] {
        &self.value
    }

    pub fn into_value(self) -> Zeroizing<Vec<u8>> {
        self.value
    }
}

#[derive(Debug)]
pub enum HashOutput {
    Digest(Digest512),
    Keys(Vec<DerivedKey>),
}

/// Keccak core with a data input, a key port and an output port.
#[derive(Debug, Default)]
pub struct HashCore {
    input: Option<Zeroizing<Vec<u8>>>,
    output: Option<HashOutput>,
    key: Option<LoadedKey>,
    randoms: Option<Vec<u8>>,
}

impl HashCore {
    pub fn stage_input(&mut self, bytes: Vec<u8>) {
        self.input = Some(Zeroizing::new(bytes));
    }

    pub fn stage_randoms(&mut self, bytes: Vec<u8>) {
        self.randoms = Some(bytes);
    }

    pub fn has_randoms(&self) -> bool {
        self.randoms.is_some()
    }

    pub fn load_key(&mut self, key: LoadedKey) {
        self.key = Some(key);
    }

    pub fn key(&self) -> Option<&LoadedKey> {
        self.key.as_ref()
    }

    pub fn output(&self) -> Option<&HashOutput> {
        self.output.as_ref()
    }

    pub fn take_output(&mut self) -> Option<HashOutput> {
        self.output.take()
    }

    /// Digests the staged input into the output port and raises Hash_done.
    pub fn run(&mut self, enabled: bool) -> Result<Digest512, CoreError> {
        gate(enabled, "Hash")?;
        let input = self.input.take().ok_or(CoreError::NoInputStaged)?;
        let d = keccak_digest(&input);
        self.output = Some(HashOutput::Digest(d));
        Ok(d)
    }

    /// Runs the key schedule on the loaded key.
    ///
    /// A pre-master key yields the master key
    /// `Keccak(pre_master || client_random || server_random)`; a master key
    /// yields four 128-bit session keys split from `Keccak(master)`. MAC keys
    /// derive nothing and just stay loaded. Returns whether keys were produced.
    pub fn derive(&mut self, enabled: bool) -> Result<bool, CoreError> {
        gate(enabled, "Hash")?;
        let key = self.key.as_ref().ok_or(CoreError::NoKeyLoaded("Hash"))?;
        let keys = match key.key_type {
            KeyType::PreMaster => {
                let randoms = self.randoms.take().ok_or(CoreError::RandomsNotStaged)?;
                let master = keccak_digest_parts(&[key.value(), &randoms]);
                vec![DerivedKey::new(KeyType::Master, Zeroizing::new(master.0.to_vec()))]
            }
            KeyType::Master => {
                let block = Zeroizing::new(keccak_digest(key.value()).0);
                const SPLIT: [KeyType; 4] = [
                    KeyType::Encryption,
                    KeyType::Encryption,
                    KeyType::ClientMac,
                    KeyType::ServerMac,
                ];
                SPLIT
                    .iter()
                    .zip(block.chunks_exact(16))
                    .map(|(t, c)| DerivedKey::new(*t, Zeroizing::new(c.to_vec())))
                    .collect()
            }
            _ => return Ok(false),
        };
        self.output = Some(HashOutput::Keys(keys));
        Ok(true)
    }

    /// `Keccak(mac_key || message)` with the MAC key on the key port.
    pub fn keyed_digest(&mut self, enabled: bool, message: &[u8]) -> Result<Digest512, CoreError> {
        gate(enabled, "Hash")?;
        let key = self
            .key
            .as_ref()
            .filter(|k| matches!(k.key_type, KeyType::ClientMac | KeyType::ServerMac))
            .ok_or(CoreError::NoKeyLoaded("Hash"))?;
        Ok(keccak_digest_parts(&[key.value(), message]))
    }
}

#[derive(Debug, Default)]
pub struct AesCore {
    key: Option<SymmetricKey>,
}

impl AesCore {
    pub fn load_key(&mut self, key: SymmetricKey) {
        self.key = Some(key);
    }

    pub fn key(&self) -> Option<&SymmetricKey> {
        self.key.as_ref()
    }

    pub fn encrypt(&self, enabled: bool, plaintext: &[u8]) -> Result<Vec<u8>, CoreError> {
        gate(enabled, "Enc")?;
        let key = self.key.as_ref().ok_or(CoreError::NoKeyLoaded("Enc"))?;
        Ok(aes_encrypt(key, plaintext)?)
    }
}

/// RSA block. Holds the server public key for pre-master transport and the
/// offline-generated signing keys of every registered IP.
#[derive(Debug)]
pub struct PubEnCore {
    server_key: Option<RsaPublicKey>,
    input: Option<Digest512>,
    output: Option<Signature1024>,
    signers: BTreeMap<IpId, RsaKeyPair>,
    impostor: Option<RsaKeyPair>,
}

impl PubEnCore {
    pub fn new(signers: BTreeMap<IpId, RsaKeyPair>) -> Self {
        Self {
            server_key: None,
            input: None,
            output: None,
            signers,
            impostor: None,
        }
    }

    pub fn load_server_key(&mut self, key: RsaPublicKey) {
        self.server_key = Some(key);
    }

    pub fn server_key(&self) -> Option<&RsaPublicKey> {
        self.server_key.as_ref()
    }

    /// Raw RSA encryption under the server key.
    pub fn encrypt_for_server(&self, enabled: bool, message: &[u8]) -> Result<Signature1024, CoreError> {
        gate(enabled, "RSA")?;
        let key = self.server_key.as_ref().ok_or(CoreError::NoKeyLoaded("RSA server"))?;
        Ok(key
            .encrypt_raw(message)
            .expect("48-byte message is below any 1024-bit modulus"))
    }

    pub fn load_input(&mut self, digest: Digest512) {
        self.input = Some(digest);
    }

    pub fn input(&self) -> Option<&Digest512> {
        self.input.as_ref()
    }

    /// Replaces the signing key for the next signature. Models a compromised
    /// IP signing with a key the registry never saw.
    pub fn install_impostor(&mut self, key: RsaKeyPair) {
        self.impostor = Some(key);
    }

    /// Signs the staged digest on behalf of `requestee`.
    pub fn sign_for(&mut self, enabled: bool, requestee: IpId) -> Result<Signature1024, CoreError> {
        gate(enabled, "RSA")?;
        let digest = self.input.take().ok_or(CoreError::NoInputStaged)?;
        let signer = match self.impostor.take() {
            Some(k) => k,
            None => self
                .signers
                .get(&requestee)
                .cloned()
                .ok_or(CoreError::NoKeyLoaded("RSA signer"))?,
        };
        let sig = rsa_sign(&digest, &signer).expect("512-bit digest is below a 1024-bit modulus");
        self.output = Some(sig);
        Ok(sig)
    }

    pub fn output(&self) -> Option<&Signature1024> {
        self.output.as_ref()
    }

    pub fn take_output(&mut self) -> Option<Signature1024> {
        self.output.take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enabled_rng_produces_384_bits() {
        let mut rng = RngCore::default();
        rng.reseed(b"seed");
        let out = rng.generate(true).unwrap().to_vec();
        assert_eq!(out.len(), 48);
        let mut oracle = DrbgState::from_material(b"seed");
        assert_eq!(out, oracle.next_384().to_vec());
    }

    #[test]
    fn disabled_rng_refuses() {
        let mut rng = RngCore::default();
        rng.reseed(b"seed");
        assert_eq!(rng.generate(false).err(), Some(CoreError::CoreNotEnabled("RNG")));
        assert!(rng.output().is_none());
    }

    #[test]
    fn unseeded_rng_refuses() {
        let mut rng = RngCore::default();
        assert_eq!(rng.generate(true).err(), Some(CoreError::NotSeeded));
    }

    #[test]
    fn hash_core_digests_staged_input_once() {
        let mut h = HashCore::default();
        assert!(h.output().is_none());
        h.stage_input(b"abc".to_vec());
        let d = h.run(true).unwrap();
        assert_eq!(d, keccak_digest(b"abc"));
        assert!(matches!(h.output(), Some(HashOutput::Digest(x)) if *x == d));
        assert_eq!(h.run(true), Err(CoreError::NoInputStaged));
    }

    #[test]
    fn master_derivation_needs_randoms() {
        let mut h = HashCore::default();
        h.load_key(DerivedKey::new(KeyType::PreMaster, Zeroizing::new(vec![1; 48])));
        assert_eq!(h.derive(true), Err(CoreError::RandomsNotStaged));
        h.stage_randoms(vec![2; 64]);
        assert_eq!(h.derive(true), Ok(true));
        let Some(HashOutput::Keys(keys)) = h.output() else {
            panic!("no keys")
        };
        let mut pre = vec![1u8; 48];
        pre.extend_from_slice(&[2; 64]);
        assert_eq!(keys[0].value(), &keccak_digest(&pre).0[..]);
        assert_eq!(keys[0].key_type(), KeyType::Master);
    }

    #[test]
    fn session_split_is_four_quarters_of_master_digest() {
        let mut h = HashCore::default();
        h.load_key(DerivedKey::new(KeyType::Master, Zeroizing::new(vec![3; 64])));
        h.derive(true).unwrap();
        let Some(HashOutput::Keys(keys)) = h.take_output() else {
            panic!("no keys")
        };
        let whole = keccak_digest(&[3; 64]);
        let types: Vec<_> = keys.iter().map(DerivedKey::key_type).collect();
        assert_eq!(
            types,
            [KeyType::Encryption, KeyType::Encryption, KeyType::ClientMac, KeyType::ServerMac]
        );
        for (i, k) in keys.iter().enumerate() {
            assert_eq!(k.value(), &whole.0[16 * i..16 * (i + 1)]);
        }
    }

    #[test]
    fn keyed_digest_requires_mac_key() {
        let mut h = HashCore::default();
        assert!(h.keyed_digest(true, b"m").is_err());
        h.load_key(DerivedKey::new(KeyType::ClientMac, Zeroizing::new(vec![4; 16])));
        let d = h.keyed_digest(true, b"m").unwrap();
        assert_eq!(d, keccak_digest_parts(&[&[4; 16], b"m"]));
    }

    #[test]
    fn aes_core_needs_key_and_enable() {
        let mut a = AesCore::default();
        assert_eq!(a.encrypt(true, b"x"), Err(CoreError::NoKeyLoaded("Enc")));
        a.load_key(SymmetricKey::new([1; 16], KeyType::Encryption));
        assert_eq!(a.encrypt(false, b"x"), Err(CoreError::CoreNotEnabled("Enc")));
        assert_eq!(a.encrypt(true, b"x").unwrap().len(), 1);
    }
}
