//! 16-bit control word register.
//!
//! ```text
//!  15    12 11     8   7     6     5    4    3    2    1    0
//! +--------+--------+-----+-----+----+----+----+----+----+----+
//! | source |  dest  | BLK | CBI | RSA| RNG|Hash| Enc| MKM|Buff|
//! +--------+--------+-----+-----+----+----+----+----+----+----+
//! ```

use thiserror::Error;

use crate::cores::{CoreEnables, DestAddr, SourceAddr};

/// Mask applied to the verify/commit word: its bits [11:4] are don't-cares.
pub const COMMIT_MASK: u16 = 0xF00F;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CwrError {
    #[error("source nibble {0:#x} addresses no input port")]
    InvalidSource(u8),
    #[error("destination nibble {0:#x} addresses no output port")]
    InvalidDestination(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlWord {
    pub source: SourceAddr,
    pub dest: DestAddr,
    pub block_gen: bool,
    pub cbi_enable: bool,
    pub enables: CoreEnables,
}

impl Default for ControlWord {
    fn default() -> Self {
        Self {
            source: SourceAddr::Rng,
            dest: DestAddr::Buff,
            block_gen: false,
            cbi_enable: false,
            enables: CoreEnables::empty(),
        }
    }
}

pub fn decode_cwr(word: u16) -> Result<ControlWord, CwrError> {
    let src = (word >> 12) as u8 & 0xf;
    let dst = (word >> 8) as u8 & 0xf;
    Ok(ControlWord {
        source: SourceAddr::from_bits(src).ok_or(CwrError::InvalidSource(src))?,
        dest: DestAddr::from_bits(dst).ok_or(CwrError::InvalidDestination(dst))?,
        block_gen: word & (1 << 7) != 0,
        cbi_enable: word & (1 << 6) != 0,
        enables: CoreEnables::from_bits_truncate(word as u8 & 0x3f),
    })
}

/// Decodes after clearing don't-care bits.
pub fn decode_masked(word: u16, mask: u16) -> Result<ControlWord, CwrError> {
    decode_cwr(word & mask)
}

pub fn encode_cwr(cw: &ControlWord) -> u16 {
    (u16::from(cw.source.bits()) << 12)
        | (u16::from(cw.dest.bits()) << 8)
        | (u16::from(cw.block_gen) << 7)
        | (u16::from(cw.cbi_enable) << 6)
        | u16::from(cw.enables.bits())
}

impl ControlWord {
    pub fn decode(word: u16) -> Result<Self, CwrError> {
        decode_cwr(word)
    }

    pub fn encode(&self) -> u16 {
        encode_cwr(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_rnd_word() {
        let cw = decode_cwr(0x0050).unwrap();
        assert_eq!(cw.source, SourceAddr::Rng);
        assert_eq!(cw.dest, DestAddr::Buff);
        assert!(cw.cbi_enable);
        assert!(!cw.block_gen);
        assert_eq!(cw.enables, CoreEnables::RNG);
    }

    #[test]
    fn hash_of_buff_word() {
        let cw = decode_cwr(0x1341).unwrap();
        assert_eq!(cw.source, SourceAddr::Buff);
        assert_eq!(cw.dest, DestAddr::HashIn);
        assert!(cw.cbi_enable);
        assert_eq!(cw.enables, CoreEnables::BUFF);
    }

    #[test]
    fn zero_word_disables_everything() {
        let cw = decode_cwr(0).unwrap();
        assert_eq!(cw, ControlWord::default());
        assert_eq!(encode_cwr(&ControlWord::default()), 0);
    }

    #[test]
    fn out_of_range_nibbles() {
        assert_eq!(decode_cwr(0x4000), Err(CwrError::InvalidSource(4)));
        assert_eq!(decode_cwr(0x0500), Err(CwrError::InvalidDestination(5)));
        assert_eq!(decode_cwr(0xff00), Err(CwrError::InvalidSource(0xf)));
    }

    #[test]
    fn hash_write_block_roundtrip() {
        assert_eq!(encode_cwr(&decode_cwr(0x20C9).unwrap()), 0x20C9);
    }

    #[test]
    fn exhaustive_roundtrip_over_accepted_words() {
        let mut accepted = 0u32;
        for w in 0..=u16::MAX {
            if let Ok(cw) = decode_cwr(w) {
                accepted += 1;
                assert_eq!(encode_cwr(&cw), w, "word {w:#06x}");
            } else {
                assert!((w >> 12) > 3 || ((w >> 8) & 0xf) > 4);
            }
        }
        // 4 sources x 5 destinations x 2^8 low bits.
        assert_eq!(accepted, 4 * 5 * 256);
    }

    #[test]
    fn commit_mask_ignores_middle_bits() {
        for mid in [0x000u16, 0x0ff0, 0x0a50, 0x0ff0 & 0x0f70] {
            let cw = decode_masked(0x1003 | mid, COMMIT_MASK).unwrap();
            assert_eq!(cw.source, SourceAddr::Buff);
            assert_eq!(cw.enables, CoreEnables::MKM | CoreEnables::BUFF);
            assert!(!cw.cbi_enable);
        }
    }
}
