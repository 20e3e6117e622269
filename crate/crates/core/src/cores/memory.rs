use std::collections::BTreeMap;

use super::{CoreError, MemoryRegion};

/// Shortest key value considered by the taint check. Shorter patterns would
/// match by accident.
pub const TAINT_MIN_LEN: usize = 16;

/// True when any secret of at least [`TAINT_MIN_LEN`] bytes occurs in `haystack`.
pub fn contains_secret(haystack: &[u8], secrets: &[&[u8]]) -> bool {
    secrets
        .iter()
        .filter(|s| s.len() >= TAINT_MIN_LEN && s.len() <= haystack.len())
        .any(|s| haystack.windows(s.len()).any(|w| w == *s))
}

/// Processor-visible shared memory, addressed by region start.
#[derive(Debug, Default, Clone)]
pub struct SharedMemory {
    cells: BTreeMap<u32, Vec<u8>>,
}

impl SharedMemory {
    pub const REGION: MemoryRegion = MemoryRegion::Processor;

    pub fn write(&mut self, addr: u32, bytes: Vec<u8>, secrets: &[&[u8]]) -> Result<(), CoreError> {
        if contains_secret(&bytes, secrets) {
            return Err(CoreError::IsolationViolation { addr });
        }
        self.cells.insert(addr, bytes);
        Ok(())
    }

    pub fn read(&self, addr: u32) -> Option<&[u8]> {
        self.cells.get(&addr).map(Vec::as_slice)
    }

    /// Raw mutable access, as any PE software has. Used to model tampering.
    pub fn get_mut(&mut self, addr: u32) -> Option<&mut Vec<u8>> {
        self.cells.get_mut(&addr)
    }

    /// First address whose contents contain a secret.
    pub fn scan(&self, secrets: &[&[u8]]) -> Option<u32> {
        self.cells
            .iter()
            .find(|(_, v)| contains_secret(v, secrets))
            .map(|(a, _)| *a)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u8])> {
        self.cells.iter().map(|(a, v)| (*a, v.as_slice()))
    }
}

/// Simulated time, kept in picoseconds so sub-nanosecond charges stay exact.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct TimerState {
    now_ps: u64,
}

impl TimerState {
    pub fn now_ps(&self) -> u64 {
        self.now_ps
    }

    pub fn now_ns(&self) -> u64 {
        self.now_ps / 1000
    }

    pub fn charge(&mut self, ps: u64) {
        self.now_ps += ps;
    }
}
