//! Keccak-f[1600] sponge instantiated as SHA3-512 (FIPS-202 domain padding).

use std::fmt;

const ROUNDS: usize = 24;

/// SHA3-512 rate in bytes (1600 - 2 * 512 bits).
const RATE: usize = 72;

const ROUND_CONSTANTS: [u64; ROUNDS] = [
    0x0000_0000_0000_0001,
    0x0000_0000_0000_8082,
    0x8000_0000_0000_808a,
    0x8000_0000_8000_8000,
    0x0000_0000_0000_808b,
    0x0000_0000_8000_0001,
    0x8000_0000_8000_8081,
    0x8000_0000_0000_8009,
    0x0000_0000_0000_008a,
    0x0000_0000_0000_0088,
    0x0000_0000_8000_8009,
    0x0000_0000_8000_000a,
    0x0000_0000_8000_808b,
    0x8000_0000_0000_008b,
    0x8000_0000_0000_8089,
    0x8000_0000_0000_8003,
    0x8000_0000_0000_8002,
    0x8000_0000_0000_0080,
    0x0000_0000_0000_800a,
    0x8000_0000_8000_000a,
    0x8000_0000_8000_8081,
    0x8000_0000_0000_8080,
    0x0000_0000_8000_0001,
    0x8000_0000_8000_8008,
];

// Rotation offsets indexed by lane position x + 5y.
const RHO: [u32; 25] = [
    0, 1, 62, 28, 27, 36, 44, 6, 55, 20, 3, 10, 43, 25, 39, 41, 45, 15, 21, 8, 18, 2, 61, 56, 14,
];

fn keccak_f1600(a: &mut [u64; 25]) {
    for rc in ROUND_CONSTANTS {
        // theta
        let mut c = [0u64; 5];
        for x in 0..5 {
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20];
        }
        for x in 0..5 {
            let d = c[(x + 4) % 5] ^ c[(x + 1) % 5].rotate_left(1);
            for y in 0..5 {
                a[x + 5 * y] ^= d;
            }
        }

        // rho + pi
        let mut b = [0u64; 25];
        for x in 0..5 {
            for y in 0..5 {
                let src = x + 5 * y;
                let dst = y + 5 * ((2 * x + 3 * y) % 5);
                b[dst] = a[src].rotate_left(RHO[src]);
            }
        }

        // chi
        for y in 0..5 {
            for x in 0..5 {
                a[x + 5 * y] = b[x + 5 * y] ^ (!b[(x + 1) % 5 + 5 * y] & b[(x + 2) % 5 + 5 * y]);
            }
        }

        // iota
        a[0] ^= rc;
    }
}

/// A 512-bit Keccak digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest512(pub [u8; 64]);

impl Digest512 {
    pub const ZERO: Digest512 = Digest512([0u8; 64]);

    pub fn as_bytes(&self) -> &[u8; 64] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl Default for Digest512 {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for Digest512 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest512({}..)", &self.to_hex()[..16])
    }
}

impl AsRef<[u8]> for Digest512 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Incremental SHA3-512 hasher.
#[derive(Clone)]
pub struct Sha3_512 {
    state: [u64; 25],
    block: [u8; RATE],
    filled: usize,
}

impl Default for Sha3_512 {
    fn default() -> Self {
        Self::new()
    }
}

impl Sha3_512 {
    pub fn new() -> Self {
        Self {
            state: [0u64; 25],
            block: [0u8; RATE],
            filled: 0,
        }
    }

    pub fn update(&mut self, mut data: &[u8]) -> &mut Self {
        while !data.is_empty() {
            let take = (RATE - self.filled).min(data.len());
            self.block[self.filled..self.filled + take].copy_from_slice(&data[..take]);
            self.filled += take;
            data = &data[take..];
            if self.filled == RATE {
                self.absorb_block();
            }
        }
        self
    }

    fn absorb_block(&mut self) {
        for (lane, chunk) in self.state.iter_mut().zip(self.block.chunks_exact(8)) {
            *lane ^= u64::from_le_bytes(chunk.try_into().unwrap());
        }
        keccak_f1600(&mut self.state);
        self.filled = 0;
    }

    pub fn finalize(mut self) -> Digest512 {
        // SHA3 domain bits 01 followed by pad10*1.
        self.block[self.filled..].fill(0);
        self.block[self.filled] ^= 0x06;
        self.block[RATE - 1] ^= 0x80;
        self.absorb_block();

        let mut out = [0u8; 64];
        for (chunk, lane) in out.chunks_exact_mut(8).zip(self.state.iter()) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        Digest512(out)
    }
}

/// SHA3-512 of `message`.
pub fn keccak_digest(message: &[u8]) -> Digest512 {
    let mut h = Sha3_512::new();
    h.update(message);
    h.finalize()
}

/// SHA3-512 over the concatenation of `parts`.
pub fn keccak_digest_parts(parts: &[&[u8]]) -> Digest512 {
    let mut h = Sha3_512::new();
    for p in parts {
        h.update(p);
    }
    h.finalize()
}
