//! Attack injectors.

use thiserror::Error;

pub use crate::sim::impostor_key;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("bit {bit} is outside a {len}-byte dump")]
pub struct OutOfRange {
    pub bit: u64,
    pub len: usize,
}

/// Flips bit `bit` (LSB-first within each byte) in place.
pub fn flip_bit(bytes: &mut [u8], bit: u64) -> Result<(), OutOfRange> {
    let len = bytes.len();
    let byte = usize::try_from(bit / 8)
        .ok()
        .filter(|&b| b < len)
        .ok_or(OutOfRange { bit, len })?;
    bytes[byte] ^= 1 << (bit % 8);
    Ok(())
}

/// A copy of `dump` with one bit flipped.
pub fn inject_tamper(dump: &[u8], bit: u64) -> Result<Vec<u8>, OutOfRange> {
    let mut out = dump.to_vec();
    flip_bit(&mut out, bit)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bit_changes() {
        let d = vec![0u8; 4];
        let t = inject_tamper(&d, 9).unwrap();
        assert_eq!(t, vec![0, 2, 0, 0]);
    }

    #[test]
    fn involution() {
        let d: Vec<u8> = (0..=255).collect();
        let t = inject_tamper(&inject_tamper(&d, 1234).unwrap(), 1234).unwrap();
        assert_eq!(t, d);
    }

    #[test]
    fn out_of_range() {
        assert_eq!(inject_tamper(&[0u8; 2], 16), Err(OutOfRange { bit: 16, len: 2 }));
        assert!(inject_tamper(&[], 0).is_err());
        assert!(inject_tamper(&[0u8; 2], u64::MAX).is_err());
    }
}
