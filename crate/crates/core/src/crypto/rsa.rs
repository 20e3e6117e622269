//! Textbook RSA-1024 as used by the signature checker and the PubEn core.
//!
//! No padding scheme is applied: a digest is mapped to an integer big-endian,
//! zero left-padded to the modulus width, and exponentiated directly. This
//! mirrors a raw modular-exponentiation hardware block and is not a secure
//! signature scheme.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use super::drbg::DrbgState;
use super::keccak::Digest512;
use crate::cores::IpId;

pub const MODULUS_BITS: u64 = 1024;
pub const MODULUS_BYTES: usize = 128;
pub const PUBLIC_EXPONENT: u32 = 65_537;

const MILLER_RABIN_ROUNDS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RsaError {
    #[error("padded digest is not smaller than the modulus")]
    DigestTooLarge,
    #[error("signature value is not smaller than the modulus")]
    MalformedSignature,
    #[error("recovered value does not fit in 512 bits")]
    PaddingMismatch,
    #[error("modulus must be exactly {MODULUS_BYTES} bytes")]
    BadModulus,
}

/// A 1024-bit RSA output, big-endian.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature1024(pub [u8; MODULUS_BYTES]);

impl Signature1024 {
    pub const ZERO: Signature1024 = Signature1024([0u8; MODULUS_BYTES]);

    pub fn as_bytes(&self) -> &[u8; MODULUS_BYTES] {
        &self.0
    }

    fn to_uint(self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }
}

impl Default for Signature1024 {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for Signature1024 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature1024({}..)", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct RsaPublicKey {
    modulus: BigUint,
    exponent: BigUint,
}

impl fmt::Debug for RsaPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.modulus.to_bytes_be();
        write!(f, "RsaPublicKey(n={}.., e={})", hex::encode(&n[..4.min(n.len())]), self.exponent)
    }
}

impl RsaPublicKey {
    /// Builds a key from a 128-byte big-endian modulus and the standard exponent.
    pub fn from_modulus_bytes(bytes: &[u8]) -> Result<Self, RsaError> {
        let modulus = BigUint::from_bytes_be(bytes);
        if bytes.len() != MODULUS_BYTES || modulus.bits() != MODULUS_BITS {
            return Err(RsaError::BadModulus);
        }
        Ok(Self {
            modulus,
            exponent: BigUint::from(PUBLIC_EXPONENT),
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn exponent(&self) -> &BigUint {
        &self.exponent
    }

    pub fn modulus_bytes(&self) -> [u8; MODULUS_BYTES] {
        to_fixed(&self.modulus)
    }

    /// Raw public-key operation on an arbitrary message (`m^e mod n`).
    pub fn encrypt_raw(&self, message: &[u8]) -> Result<Signature1024, RsaError> {
        let m = BigUint::from_bytes_be(message);
        if m >= self.modulus {
            return Err(RsaError::DigestTooLarge);
        }
        Ok(Signature1024(to_fixed(&m.modpow(&self.exponent, &self.modulus))))
    }
}

/// An RSA keypair bound to the core identity that owns it.
#[derive(Clone)]
pub struct RsaKeyPair {
    public: RsaPublicKey,
    private_exponent: BigUint,
    owner: IpId,
}

impl fmt::Debug for RsaKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RsaKeyPair")
            .field("owner", &self.owner)
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl RsaKeyPair {
    pub fn public(&self) -> &RsaPublicKey {
        &self.public
    }

    pub fn owner(&self) -> IpId {
        self.owner
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.private_exponent
    }

    /// Same key material presented under another identity. Used by the
    /// attack harness to model an impostor core.
    pub fn relabeled(&self, owner: IpId) -> Self {
        Self {
            owner,
            ..self.clone()
        }
    }
}

fn to_fixed(v: &BigUint) -> [u8; MODULUS_BYTES] {
    let bytes = v.to_bytes_be();
    assert!(bytes.len() <= MODULUS_BYTES);
    let mut out = [0u8; MODULUS_BYTES];
    out[MODULUS_BYTES - bytes.len()..].copy_from_slice(&bytes);
    out
}

fn digest_to_uint(digest: &Digest512) -> BigUint {
    // Zero left-padding to 128 bytes does not change the big-endian value.
    BigUint::from_bytes_be(&digest.0)
}

/// Signs `digest` with the private exponent: `pad(digest)^d mod n`.
pub fn rsa_sign(digest: &Digest512, key: &RsaKeyPair) -> Result<Signature1024, RsaError> {
    let m = digest_to_uint(digest);
    if m >= key.public.modulus {
        return Err(RsaError::DigestTooLarge);
    }
    let s = m.modpow(&key.private_exponent, &key.public.modulus);
    Ok(Signature1024(to_fixed(&s)))
}

/// Recovers the signed digest: `sig^e mod n`, unpadded to 512 bits.
///
/// The caller compares the result against a freshly computed digest.
pub fn rsa_verify(sig: &Signature1024, key: &RsaPublicKey) -> Result<Digest512, RsaError> {
    let s = sig.to_uint();
    if s >= key.modulus {
        return Err(RsaError::MalformedSignature);
    }
    let m = to_fixed(&s.modpow(&key.exponent, &key.modulus));
    if m[..64].iter().any(|&b| b != 0) {
        return Err(RsaError::PaddingMismatch);
    }
    let mut out = [0u8; 64];
    out.copy_from_slice(&m[64..]);
    Ok(Digest512(out))
}

/// Deterministically derives a keypair with a 1024-bit modulus from `drbg`.
pub fn rsa_keygen(drbg: &mut DrbgState, owner: IpId) -> RsaKeyPair {
    let e = BigUint::from(PUBLIC_EXPONENT);
    loop {
        let p = gen_prime(drbg, &e);
        let q = gen_prime(drbg, &e);
        if p == q {
            continue;
        }
        let modulus = &p * &q;
        if modulus.bits() != MODULUS_BITS {
            continue;
        }
        let one = BigUint::one();
        let lambda = (&p - &one).lcm(&(&q - &one));
        let Some(d) = e.modinv(&lambda) else {
            continue;
        };
        return RsaKeyPair {
            public: RsaPublicKey {
                modulus,
                exponent: e,
            },
            private_exponent: d,
            owner,
        };
    }
}

fn small_primes() -> &'static [u32] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = 4096usize;
        let mut sieve = vec![true; limit];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..limit {
            if sieve[i] {
                let mut j = i * i;
                while j < limit {
                    sieve[j] = false;
                    j += i;
                }
            }
        }
        (3..limit as u32).filter(|&i| sieve[i as usize]).collect()
    })
}

fn gen_prime(drbg: &mut DrbgState, e: &BigUint) -> BigUint {
    let one = BigUint::one();
    loop {
        let mut bytes = [0u8; MODULUS_BYTES / 2];
        drbg.fill(&mut bytes);
        // Top two bits set so the product of two such primes has exactly 1024 bits.
        bytes[0] |= 0xc0;
        bytes[MODULUS_BYTES / 2 - 1] |= 1;
        let candidate = BigUint::from_bytes_be(&bytes);

        if small_primes()
            .iter()
            .any(|&sp| (&candidate % sp).is_zero())
        {
            continue;
        }
        if (&candidate - &one).gcd(e) != one {
            continue;
        }
        if is_probable_prime(&candidate, drbg) {
            return candidate;
        }
    }
}

fn is_probable_prime(n: &BigUint, drbg: &mut DrbgState) -> bool {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let mut wb = [0u8; MODULUS_BYTES / 2];
        drbg.fill(&mut wb);
        let a = BigUint::from_bytes_be(&wb) % (n - 3u32) + &two;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
