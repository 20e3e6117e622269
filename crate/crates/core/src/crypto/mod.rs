//! Cryptographic building blocks of the simulated cores.
//!
//! Everything here is a pure function of its inputs. None of it is
//! constant-time; the primitives model hardware blocks, they do not protect
//! real secrets.

pub mod aes;
pub mod drbg;
pub mod keccak;
pub mod rsa;

pub use aes::{aes_encrypt, AesError, SymmetricKey};
pub use drbg::DrbgState;
pub use keccak::{keccak_digest, keccak_digest_parts, Digest512};
pub use rsa::{rsa_keygen, rsa_sign, rsa_verify, RsaError, RsaKeyPair, RsaPublicKey, Signature1024};
