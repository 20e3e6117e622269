//! AES-128 block cipher and the counter-mode wrapper used by the Enc core.

use std::sync::OnceLock;

use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::cores::KeyType;

pub const KEY_LEN: usize = 16;
pub const BLOCK_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AesError {
    #[error("plaintext is empty")]
    EmptyPlaintext,
}

/// A 128-bit session key tagged with its intended use.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct SymmetricKey {
    bytes: [u8; KEY_LEN],
    #[zeroize(skip)]
    key_type: KeyType,
}

impl std::fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymmetricKey({:?}, <redacted>)", self.key_type)
    }
}

impl SymmetricKey {
    pub fn new(bytes: [u8; KEY_LEN], key_type: KeyType) -> Self {
        Self { bytes, key_type }
    }

    pub fn from_slice(bytes: &[u8], key_type: KeyType) -> Option<Self> {
        Some(Self::new(bytes.try_into().ok()?, key_type))
    }

    pub fn bytes(&self) -> &[u8; KEY_LEN] {
        &self.bytes
    }

    pub fn key_type(&self) -> KeyType {
        self.key_type
    }
}

fn xtime(b: u8) -> u8 {
    (b << 1) ^ if b & 0x80 != 0 { 0x1b } else { 0 }
}

fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        a = xtime(a);
        b >>= 1;
    }
    p
}

fn sbox() -> &'static [u8; 256] {
    static SBOX: OnceLock<[u8; 256]> = OnceLock::new();
    SBOX.get_or_init(|| {
        let mut table = [0u8; 256];
        for (x, slot) in table.iter_mut().enumerate() {
            // Multiplicative inverse in GF(2^8) by exhaustive search; 0 maps to 0.
            let inv = (1..=255u8)
                .find(|&y| gf_mul(x as u8, y) == 1)
                .unwrap_or(0);
            *slot = inv
                ^ inv.rotate_left(1)
                ^ inv.rotate_left(2)
                ^ inv.rotate_left(3)
                ^ inv.rotate_left(4)
                ^ 0x63;
        }
        table
    })
}

/// Expanded AES-128 key schedule (11 round keys).
pub struct Aes128 {
    round_keys: [[u8; 16]; 11],
}

impl Drop for Aes128 {
    fn drop(&mut self) {
        self.round_keys.zeroize();
    }
}

impl Aes128 {
    pub fn new(key: &[u8; KEY_LEN]) -> Self {
        let s = sbox();
        let mut w = [[0u8; 4]; 44];
        for i in 0..4 {
            w[i].copy_from_slice(&key[4 * i..4 * i + 4]);
        }
        let mut rcon = 1u8;
        for i in 4..44 {
            let mut t = w[i - 1];
            if i % 4 == 0 {
                t.rotate_left(1);
                for b in t.iter_mut() {
                    *b = s[*b as usize];
                }
                t[0] ^= rcon;
                rcon = xtime(rcon);
            }
            for j in 0..4 {
                w[i][j] = w[i - 4][j] ^ t[j];
            }
        }
        let mut round_keys = [[0u8; 16]; 11];
        for (r, rk) in round_keys.iter_mut().enumerate() {
            for c in 0..4 {
                rk[4 * c..4 * c + 4].copy_from_slice(&w[4 * r + c]);
            }
        }
        w.zeroize();
        Self { round_keys }
    }

    pub fn encrypt_block(&self, block: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
        let s = sbox();
        let mut st = *block;
        xor_in(&mut st, &self.round_keys[0]);
        for round in 1..=10 {
            for b in st.iter_mut() {
                *b = s[*b as usize];
            }
            shift_rows(&mut st);
            if round != 10 {
                mix_columns(&mut st);
            }
            xor_in(&mut st, &self.round_keys[round]);
        }
        st
    }
}

fn xor_in(st: &mut [u8; 16], rk: &[u8; 16]) {
    for (a, b) in st.iter_mut().zip(rk) {
        *a ^= b;
    }
}

// State is column-major: byte (row r, column c) at index r + 4c.
fn shift_rows(st: &mut [u8; 16]) {
    let old = *st;
    for r in 1..4 {
        for c in 0..4 {
            st[r + 4 * c] = old[r + 4 * ((c + r) % 4)];
        }
    }
}

fn mix_columns(st: &mut [u8; 16]) {
    for c in 0..4 {
        let col = [st[4 * c], st[4 * c + 1], st[4 * c + 2], st[4 * c + 3]];
        for r in 0..4 {
            st[4 * c + r] = gf_mul(col[r], 2)
                ^ gf_mul(col[(r + 1) % 4], 3)
                ^ col[(r + 2) % 4]
                ^ col[(r + 3) % 4];
        }
    }
}

/// AES-128-CTR with a zero initial counter block. Applying it twice with the
/// same key returns the original input.
pub fn aes_encrypt(key: &SymmetricKey, plaintext: &[u8]) -> Result<Vec<u8>, AesError> {
    if plaintext.is_empty() {
        return Err(AesError::EmptyPlaintext);
    }
    let cipher = Aes128::new(key.bytes());
    let mut out = Vec::with_capacity(plaintext.len());
    for (i, chunk) in plaintext.chunks(BLOCK_LEN).enumerate() {
        let counter = (i as u128).to_be_bytes();
        let ks = cipher.encrypt_block(&counter);
        out.extend(chunk.iter().zip(ks.iter()).map(|(p, k)| p ^ k));
    }
    Ok(out)
}
