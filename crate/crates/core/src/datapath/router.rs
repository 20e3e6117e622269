//! Custom bus interconnect: a MUX/DEMUX crossbar between core ports.

use thiserror::Error;

use super::cwr::ControlWord;
use crate::cores::{BufferPayload, Cores, DestAddr, HashOutput, KeyType, SourceAddr};
use crate::crypto::SymmetricKey;
use crate::ledger::{commitment_preimage, SignatureScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Through the interconnect, confined to the crypto and confidential areas.
    Custom,
    /// PE-issued over AXI or DMA; touches processor memory.
    ProcessorPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Pe,
    SharedMemory(u32),
    Source(SourceAddr),
    Dest(DestAddr),
    Core(&'static str),
    Mkm,
}

/// One data movement. Custom transfers record only the payload length; a
/// processor-path transfer keeps its bytes so they can be taint checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferPath {
    pub kind: TransferKind,
    pub from: Endpoint,
    pub to: Endpoint,
    pub payload_len: usize,
    pub payload: Option<Vec<u8>>,
}

impl TransferPath {
    pub fn custom(source: SourceAddr, dest: DestAddr, len: usize) -> Self {
        Self {
            kind: TransferKind::Custom,
            from: Endpoint::Source(source),
            to: Endpoint::Dest(dest),
            payload_len: len,
            payload: None,
        }
    }

    pub fn processor(from: Endpoint, to: Endpoint, bytes: &[u8]) -> Self {
        Self {
            kind: TransferKind::ProcessorPath,
            from,
            to,
            payload_len: bytes.len(),
            payload: Some(bytes.to_vec()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RouteError {
    #[error("interconnect disabled (neither CBI enable nor block-gen set)")]
    CbiDisabled,
    #[error("{0:?} port has no data ready")]
    SourceNotReady(SourceAddr),
    #[error("no path from {from:?} to {to:?}")]
    Unroutable { from: SourceAddr, to: DestAddr },
    #[error("granted key is bound to {granted:?}, not {requested:?}")]
    PortMismatch { granted: DestAddr, requested: DestAddr },
    #[error("buffer already holds data")]
    BufferBusy,
}

/// Moves the payload waiting on `cw.source` to `cw.dest`.
///
/// `scope` selects what the buffer presents at Hash_In: the full block
/// preimage, or only the data portion.
pub fn cbi_route(cores: &mut Cores, cw: &ControlWord, scope: SignatureScope) -> Result<TransferPath, RouteError> {
    if !cw.cbi_enable && !cw.block_gen {
        return Err(RouteError::CbiDisabled);
    }
    let (s, d) = (cw.source, cw.dest);
    let len = match (s, d) {
        (SourceAddr::Rng, DestAddr::Buff) => {
            let buf = &cores.buffer;
            if buf.payload().is_some() || buf.pending().is_some() || buf.granted().is_some() {
                return Err(RouteError::BufferBusy);
            }
            let rnd = cores.rng.take_output().ok_or(RouteError::SourceNotReady(s))?;
            let n = rnd.len();
            cores
                .buffer
                .set_payload(BufferPayload::new(rnd, SourceAddr::Rng, KeyType::PreMaster));
            n
        }
        (SourceAddr::Buff, DestAddr::HashKey | DestAddr::EnKey) => {
            let g = cores.buffer.granted().ok_or(RouteError::SourceNotReady(s))?;
            if g.dest() != d {
                return Err(RouteError::PortMismatch {
                    granted: g.dest(),
                    requested: d,
                });
            }
            let g = cores.buffer.take_granted().expect("checked above");
            let n = g.value().len();
            if d == DestAddr::HashKey {
                cores.hash.load_key(g.into_key());
            } else {
                let t = g.key_type();
                let key = SymmetricKey::from_slice(g.value(), t)
                    .ok_or(RouteError::PortMismatch { granted: g.dest(), requested: d })?;
                cores.aes.load_key(key);
            }
            n
        }
        (SourceAddr::Buff, DestAddr::HashIn) => {
            let p = cores.buffer.pending().ok_or(RouteError::SourceNotReady(s))?;
            let input = match scope {
                SignatureScope::FullBlock => p.block.preimage_record().to_vec(),
                SignatureScope::DataOnly => {
                    commitment_preimage(cores.buffer.payload().map_or(&[][..], |d| d.bytes()))
                }
            };
            let n = input.len();
            cores.hash.stage_input(input);
            n
        }
        (SourceAddr::Buff, DestAddr::PubEnIn) => {
            let d = cores
                .buffer
                .pending()
                .and_then(|p| p.digest)
                .ok_or(RouteError::SourceNotReady(s))?;
            cores.puben.load_input(d);
            64
        }
        (SourceAddr::Hash, DestAddr::Buff) => match cores.hash.output() {
            None => return Err(RouteError::SourceNotReady(s)),
            Some(HashOutput::Digest(_)) => {
                let Some(HashOutput::Digest(dg)) = cores.hash.take_output() else {
                    unreachable!()
                };
                let p = cores.buffer.pending_mut().ok_or(RouteError::SourceNotReady(SourceAddr::Buff))?;
                p.digest = Some(dg);
                64
            }
            Some(HashOutput::Keys(_)) => {
                let buf = &cores.buffer;
                if buf.payload().is_some() || buf.pending().is_some() || !buf.staged().is_empty() {
                    return Err(RouteError::BufferBusy);
                }
                let Some(HashOutput::Keys(keys)) = cores.hash.take_output() else {
                    unreachable!()
                };
                let n = keys.iter().map(|k| k.value().len()).sum();
                cores.buffer.stage_keys(keys);
                n
            }
        },
        (SourceAddr::PubEn, DestAddr::Buff) => {
            if cores.buffer.pending().is_none() {
                return Err(RouteError::SourceNotReady(SourceAddr::Buff));
            }
            let sig = cores.puben.take_output().ok_or(RouteError::SourceNotReady(s))?;
            cores.buffer.pending_mut().expect("checked above").signature = Some(sig);
            128
        }
        _ => return Err(RouteError::Unroutable { from: s, to: d }),
    };
    Ok(TransferPath::custom(s, d, len))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::cores::{CoreEnables, PubEnCore};
    use crate::datapath::cwr::decode_cwr;

    fn cores() -> Cores {
        Cores::new(PubEnCore::new(BTreeMap::new()))
    }

    #[test]
    fn rng_to_buffer_moves_the_draw() {
        let mut c = cores();
        c.rng.reseed(b"seed");
        let rnd = c.rng.generate(true).unwrap().to_vec();
        let t = cbi_route(&mut c, &decode_cwr(0x0050).unwrap(), SignatureScope::FullBlock).unwrap();
        assert_eq!(t.kind, TransferKind::Custom);
        assert_eq!(t.payload_len, 48);
        assert!(t.payload.is_none());
        assert_eq!(c.buffer.payload().unwrap().bytes(), &rnd[..]);
        assert!(c.rng.output().is_none());
    }

    #[test]
    fn disabled_interconnect() {
        let mut c = cores();
        let cw = ControlWord {
            enables: CoreEnables::all(),
            ..ControlWord::default()
        };
        assert_eq!(
            cbi_route(&mut c, &cw, SignatureScope::FullBlock),
            Err(RouteError::CbiDisabled)
        );
    }

    #[test]
    fn source_not_ready_without_rng_output() {
        let mut c = cores();
        assert_eq!(
            cbi_route(&mut c, &decode_cwr(0x0050).unwrap(), SignatureScope::FullBlock),
            Err(RouteError::SourceNotReady(SourceAddr::Rng))
        );
    }

    #[test]
    fn key_delivery_needs_a_grant() {
        let mut c = cores();
        assert_eq!(
            cbi_route(&mut c, &decode_cwr(0x1245).unwrap(), SignatureScope::FullBlock),
            Err(RouteError::SourceNotReady(SourceAddr::Buff))
        );
    }

    #[test]
    fn buffer_to_buffer_is_unroutable() {
        let mut c = cores();
        let cw = ControlWord {
            source: SourceAddr::Buff,
            dest: DestAddr::Buff,
            cbi_enable: true,
            ..ControlWord::default()
        };
        assert!(matches!(
            cbi_route(&mut c, &cw, SignatureScope::FullBlock),
            Err(RouteError::Unroutable { .. })
        ));
    }
}
