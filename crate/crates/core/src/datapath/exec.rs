//! Instruction execution against the simulator.

use thiserror::Error;

use super::cwr::{decode_masked, ControlWord, CwrError};
use super::instruction::Instruction;
use super::router::{cbi_route, Endpoint, RouteError, TransferKind, TransferPath};
use crate::cores::{
    contains_secret, CoreEnables, CoreError, DestAddr, HashOutput, Intent, KeyType, KeyUse,
    PendingTx, SourceAddr, SystemStatus,
};
use crate::crypto::RsaPublicKey;
use crate::harness::latency_of;
use crate::ledger::{
    compose_block, requestee, verify_and_commit, BlockOp, BlockRequest, Committed, LedgerError,
    RejectReason, Transaction,
};
use crate::sim::{addr, Simulator};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("bad operand: {0}")]
    BadOperand(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Cwr(#[from] CwrError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl ExecError {
    /// Stable snake_case name used by scenario expectations.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::PreconditionViolated(_) => "precondition_violated",
            Self::BadOperand(_) => "bad_operand",
            Self::Core(e) => match e {
                CoreError::CoreNotEnabled(_) => "core_not_enabled",
                CoreError::NotSeeded => "not_seeded",
                CoreError::NoInputStaged => "no_input_staged",
                CoreError::NoKeyLoaded(_) => "no_key_loaded",
                CoreError::NoGrant => "no_grant",
                CoreError::DuplicateKeyId(_) => "duplicate_key_id",
                CoreError::KeyNotFound(_) => "key_not_found",
                CoreError::KeyTypeMismatch { .. } => "key_type_mismatch",
                CoreError::BadKeyLength { .. } => "bad_key_length",
                CoreError::IsolationViolation { .. } => "isolation_violation",
                CoreError::RandomsNotStaged => "randoms_not_staged",
                CoreError::Aes(_) => "empty_plaintext",
            },
            Self::Route(e) => match e {
                RouteError::CbiDisabled => "cbi_disabled",
                RouteError::SourceNotReady(_) => "source_not_ready",
                RouteError::Unroutable { .. } => "unroutable",
                RouteError::PortMismatch { .. } => "port_mismatch",
                RouteError::BufferBusy => "buffer_busy",
            },
            Self::Cwr(e) => match e {
                CwrError::InvalidSource(_) => "invalid_source",
                CwrError::InvalidDestination(_) => "invalid_destination",
            },
            Self::Ledger(e) => match e {
                LedgerError::EmptyBuffer => "empty_buffer",
                LedgerError::SignerMismatch { .. } => "signer_mismatch",
                LedgerError::NoRequestee => "no_requestee",
            },
        }
    }
}

fn precondition<T>(detail: &str) -> Result<T, ExecError> {
    Err(ExecError::PreconditionViolated(detail.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Done,
    Committed { block_index: u64 },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub opcode: u8,
    pub charge_ps: u64,
    pub transfers: Vec<TransferPath>,
    pub outcome: StepOutcome,
    pub warnings: Vec<String>,
    pub status: SystemStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProgramTrace {
    pub steps: Vec<StepReport>,
}

impl ProgramTrace {
    pub fn total_ps(&self) -> u64 {
        self.steps.iter().map(|s| s.charge_ps).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("step {step}: {error}")]
pub struct ProgramError {
    pub step: usize,
    pub error: ExecError,
    pub trace: ProgramTrace,
}

/// Executes one instruction. Latency is charged before execution, so a
/// failing instruction still advances the timer.
pub fn execute_instruction(sim: &mut Simulator, instr: &Instruction) -> Result<StepReport, ExecError> {
    let spec = instr.spec();
    let charge_ps = latency_of(spec.opcode, &sim.config().latency);
    sim.cores.timer.charge(charge_ps);

    let mut warnings = Vec::new();
    let cw = match spec.cwr {
        Some(c) => {
            let cw = decode_masked(c.value, c.mask)?;
            sim.enables = cw.enables;
            let missing = spec.required - cw.enables;
            if !missing.is_empty() || (spec.needs_cbi && !cw.cbi_enable) {
                warnings.push(format!(
                    "CWR/route enable divergence: instr {} word {:#06x} lacks {}",
                    spec.opcode,
                    c.value,
                    describe_missing(missing, spec.needs_cbi && !cw.cbi_enable)
                ));
            }
            Some(ControlWord {
                enables: cw.enables | spec.required,
                cbi_enable: cw.cbi_enable || spec.needs_cbi,
                ..cw
            })
        }
        None => None,
    };
    for w in &warnings {
        sim.warn(w.clone());
    }
    let enabled = cw.map_or(sim.enables, |c| c.enables) | spec.required;

    let mut ex = Exec {
        sim,
        cw,
        enabled,
        transfers: Vec::new(),
    };
    let outcome = ex.run(instr)?;
    let transfers = ex.transfers;

    let secrets = sim.cores.live_secrets();
    for t in &transfers {
        if let (TransferKind::ProcessorPath, Some(p)) = (t.kind, &t.payload) {
            if contains_secret(p, &secrets) {
                let addr = match t.to {
                    Endpoint::SharedMemory(a) => a,
                    _ => 0,
                };
                return Err(CoreError::IsolationViolation { addr }.into());
            }
        }
    }
    if let Some(addr) = sim.cores.taint_scan() {
        return Err(CoreError::IsolationViolation { addr }.into());
    }
    Ok(StepReport {
        opcode: spec.opcode,
        charge_ps,
        transfers,
        outcome,
        warnings,
        status: sim.status(),
    })
}

/// Executes `instrs` in order, stopping at the first error.
pub fn run_program(sim: &mut Simulator, instrs: &[Instruction]) -> Result<ProgramTrace, ProgramError> {
    let mut trace = ProgramTrace::default();
    for (step, i) in instrs.iter().enumerate() {
        match execute_instruction(sim, i) {
            Ok(r) => trace.steps.push(r),
            Err(error) => return Err(ProgramError { step, error, trace }),
        }
    }
    Ok(trace)
}

fn describe_missing(missing: CoreEnables, cbi: bool) -> String {
    let mut parts: Vec<&str> = missing.iter_names().map(|(n, _)| n).collect();
    if cbi {
        parts.push("CBI");
    }
    parts.join("+")
}

struct Exec<'a> {
    sim: &'a mut Simulator,
    cw: Option<ControlWord>,
    enabled: CoreEnables,
    transfers: Vec<TransferPath>,
}

impl Exec<'_> {
    fn on(&self, core: CoreEnables) -> bool {
        self.enabled.contains(core)
    }

    fn route(&mut self) -> Result<(), ExecError> {
        let cw = self.cw.expect("routed instructions carry a control word");
        let scope = self.sim.config().scope;
        let t = cbi_route(&mut self.sim.cores, &cw, scope)?;
        self.transfers.push(t);
        Ok(())
    }

    fn pe_write(&mut self, from: Endpoint, addr: u32, bytes: Vec<u8>) -> Result<(), ExecError> {
        self.transfers
            .push(TransferPath::processor(from, Endpoint::SharedMemory(addr), &bytes));
        self.sim.cores.pe_write(addr, bytes)?;
        Ok(())
    }

    fn sm_read(&mut self, addr: u32, to: Endpoint) -> Option<Vec<u8>> {
        let bytes = self.sim.cores.shared.read(addr)?.to_vec();
        self.transfers
            .push(TransferPath::processor(Endpoint::SharedMemory(addr), to, &bytes));
        Some(bytes)
    }

    fn run(&mut self, instr: &Instruction) -> Result<StepOutcome, ExecError> {
        let op = instr.opcode();
        let operand = instr.operand();
        match op {
            1 => {
                let material = match operand {
                    Some(m) => m.to_vec(),
                    None => [b"pe-seed".as_slice(), &self.sim.config().seed.to_be_bytes()].concat(),
                };
                self.transfers
                    .push(TransferPath::processor(Endpoint::Pe, Endpoint::Core("RNG"), &material));
                if !self.on(CoreEnables::RNG) {
                    return Err(CoreError::CoreNotEnabled("RNG").into());
                }
                self.sim.cores.rng.reseed(&material);
            }
            2 => {
                if !self.sim.cores.rng.is_seeded() {
                    return precondition("RNG has no seed (issue instr 1 first)");
                }
                self.ensure_buffer_idle()?;
                self.sim.cores.rng.generate(self.on(CoreEnables::RNG))?;
                self.route()?;
            }
            3 | 10 => self.write_block(op)?,
            4 => {
                let key = match operand {
                    Some(m) => RsaPublicKey::from_modulus_bytes(m)
                        .map_err(|e| ExecError::BadOperand(format!("server modulus: {e}")))?,
                    None => self.sim.genesis().server.public().clone(),
                };
                self.transfers.push(TransferPath::processor(
                    Endpoint::Pe,
                    Endpoint::Core("RSA"),
                    &key.modulus_bytes(),
                ));
                if !self.on(CoreEnables::RSA) {
                    return Err(CoreError::CoreNotEnabled("RSA").into());
                }
                self.sim.cores.puben.load_server_key(key);
            }
            5 => {
                let rnd = match self.sim.cores.buffer.payload() {
                    Some(p) if p.origin() == SourceAddr::Rng => p.bytes().to_vec(),
                    _ => return precondition("buffer holds no RNG draw to transport"),
                };
                let ct = self.sim.cores.puben.encrypt_for_server(self.on(CoreEnables::RSA), &rnd)?;
                self.pe_write(Endpoint::Core("RSA"), addr::EN_RND, ct.as_bytes().to_vec())?;
            }
            6 => {
                let randoms = match operand {
                    Some(r) if r.len() == 64 => r.to_vec(),
                    Some(r) => {
                        return Err(ExecError::BadOperand(format!(
                            "randoms must be 64 bytes (client || server), got {}",
                            r.len()
                        )))
                    }
                    None => {
                        let mut r = vec![0u8; 64];
                        self.sim.pe_drbg.fill(&mut r);
                        r
                    }
                };
                if !self.on(CoreEnables::HASH) {
                    return Err(CoreError::CoreNotEnabled("Hash").into());
                }
                self.pe_write(Endpoint::Pe, addr::RANDOMS, randoms)?;
                let r = self.sm_read(addr::RANDOMS, Endpoint::Core("Hash")).expect("just written");
                self.sim.cores.hash.stage_randoms(r);
            }
            7 | 11 | 14 => self.read_block(op, operand)?,
            8 | 15 => {
                let g = match self.sim.cores.buffer.granted() {
                    Some(g) => g,
                    None => return precondition("no granted key in the buffer (commit a read block first)"),
                };
                if g.key_type() == KeyType::PreMaster && !self.sim.cores.hash.has_randoms() {
                    return precondition("client/server randoms not staged (issue instr 6 first)");
                }
                if !self.on(CoreEnables::HASH) {
                    return Err(CoreError::CoreNotEnabled("Hash").into());
                }
                if self.sim.cores.hash.output().is_some() {
                    return precondition("hash output not yet collected");
                }
                self.route()?;
                self.sim.cores.hash.derive(true)?;
            }
            9 => {
                if !matches!(self.sim.cores.hash.output(), Some(HashOutput::Keys(_))) {
                    return precondition("hash core holds no derived keys");
                }
                self.route()?;
            }
            12 => {
                if self.sim.cores.buffer.granted().is_none() {
                    return precondition("no granted key in the buffer (commit an en-key read first)");
                }
                self.route()?;
            }
            13 => {
                if let Some(pt) = operand {
                    self.pe_write(Endpoint::Pe, addr::PLAINTEXT, pt.to_vec())?;
                }
                let pt = match self.sm_read(addr::PLAINTEXT, Endpoint::Core("Enc")) {
                    Some(p) => p,
                    None => return precondition("no plaintext in shared memory"),
                };
                let ct = self.sim.cores.aes.encrypt(self.on(CoreEnables::ENC), &pt)?;
                self.pe_write(Endpoint::Core("Enc"), addr::CIPHERTEXT, ct)?;
            }
            16 => {
                if let Some(m) = operand {
                    self.pe_write(Endpoint::Pe, addr::MESSAGE, m.to_vec())?;
                }
                let msg = match self.sm_read(addr::MESSAGE, Endpoint::Core("Hash")) {
                    Some(m) => m,
                    None => return precondition("no message in shared memory"),
                };
                let d = self.sim.cores.hash.keyed_digest(self.on(CoreEnables::HASH), &msg)?;
                self.pe_write(Endpoint::Core("Hash"), addr::DIGEST, d.as_bytes().to_vec())?;
            }
            17 => {
                if self.sim.cores.buffer.pending().is_none() {
                    return precondition("no composed block in the buffer");
                }
                if self.sim.cores.hash.output().is_some() {
                    return precondition("hash output not yet collected");
                }
                self.route()?;
                self.sim.cores.hash.run(self.on(CoreEnables::HASH))?;
            }
            18 => {
                if !matches!(self.sim.cores.hash.output(), Some(HashOutput::Digest(_))) {
                    return precondition("hash core holds no digest");
                }
                if self.sim.cores.buffer.pending().is_none() {
                    return precondition("no composed block in the buffer");
                }
                self.route()?;
            }
            19 => {
                let Some(p) = self.sim.cores.buffer.pending() else {
                    return precondition("no composed block in the buffer");
                };
                if p.digest.is_none() {
                    return precondition("block digest not loaded (issue instrs 17 and 18)");
                }
                let who = requestee(&p.block).ok_or(LedgerError::NoRequestee)?;
                self.route()?;
                self.sim.cores.puben.sign_for(self.on(CoreEnables::RSA), who)?;
            }
            20 => {
                if self.sim.cores.puben.output().is_none() {
                    return precondition("PubEn holds no signature");
                }
                self.route()?;
            }
            21 => return self.commit(),
            _ => unreachable!("opcode validated on construction"),
        }
        Ok(StepOutcome::Done)
    }

    fn ensure_buffer_idle(&self) -> Result<(), ExecError> {
        let b = &self.sim.cores.buffer;
        if b.payload().is_some() || b.pending().is_some() || b.granted().is_some() {
            return Err(RouteError::BufferBusy.into());
        }
        Ok(())
    }

    fn block_gen_addrs(&self) -> (SourceAddr, DestAddr) {
        let cw = self.cw.expect("block-gen instructions carry a control word");
        (cw.source, cw.dest)
    }

    fn write_block(&mut self, op: u8) -> Result<(), ExecError> {
        let (source, dest) = self.block_gen_addrs();
        let b = &self.sim.cores.buffer;
        if b.pending().is_some() {
            return precondition("a transaction is already pending");
        }
        let Some(p) = b.payload() else {
            return precondition("buffer holds no data to write");
        };
        if p.origin() != source {
            return precondition(&format!(
                "buffer data came from {:?}, instr {op} writes {:?} data",
                p.origin(),
                source
            ));
        }
        let key_type = p.key_type();
        let data = p.bytes().to_vec();
        let key_id = self.sim.take_key_id();
        let block = compose_block(
            &self.sim.chain,
            &BlockRequest {
                op: BlockOp::Write,
                source,
                dest,
                key_id,
                data: &data,
                status: self.sim.status().to_word(),
                timestamp_ns: self.sim.now_ns(),
            },
        )?;
        let destroy_on_read = self.sim.config().policy.destroy_on_read(key_type);
        self.sim.cores.buffer.set_pending(PendingTx {
            block,
            intent: Intent::Write {
                key_type,
                destroy_on_read,
            },
            digest: None,
            signature: None,
        });
        Ok(())
    }

    fn read_block(&mut self, op: u8, operand: Option<&[u8]>) -> Result<(), ExecError> {
        let (source, dest) = self.block_gen_addrs();
        let key_use = match op {
            7 => KeyUse::Derivation,
            11 => KeyUse::Encryption,
            _ => KeyUse::Mac,
        };
        let b = &self.sim.cores.buffer;
        if b.pending().is_some() {
            return precondition("a transaction is already pending");
        }
        if b.payload().is_some() || b.granted().is_some() {
            return precondition("buffer must be empty before a read");
        }
        let key_id = match operand {
            Some(bytes) if !bytes.is_empty() && bytes.len() <= 8 => {
                let mut be = [0u8; 8];
                be[8 - bytes.len()..].copy_from_slice(bytes);
                u64::from_be_bytes(be)
            }
            Some(bytes) => return Err(ExecError::BadOperand(format!("key id of {} bytes", bytes.len()))),
            None => match self.sim.cores.mkm.oldest_live_for(key_use) {
                Some(id) => id,
                None => return precondition(&format!("no live key for {key_use:?} use")),
            },
        };
        let block = compose_block(
            &self.sim.chain,
            &BlockRequest {
                op: BlockOp::Read,
                source,
                dest,
                key_id,
                data: &[],
                status: self.sim.status().to_word(),
                timestamp_ns: self.sim.now_ns(),
            },
        )?;
        self.sim.cores.buffer.set_pending(PendingTx {
            block,
            intent: Intent::Read { key_use },
            digest: None,
            signature: None,
        });
        Ok(())
    }

    fn commit(&mut self) -> Result<StepOutcome, ExecError> {
        let Some(p) = self.sim.cores.buffer.pending() else {
            return precondition("no composed block in the buffer");
        };
        let Some(sig) = p.signature else {
            return precondition("block not signed (issue instrs 17 to 20)");
        };
        if !self.on(CoreEnables::MKM) {
            return Err(CoreError::CoreNotEnabled("MKM").into());
        }
        let mut block = p.block;
        block.signature = sig;
        let intent = p.intent;
        let data = self
            .sim
            .cores
            .buffer
            .payload()
            .filter(|_| matches!(intent, Intent::Write { .. }))
            .map(|d| zeroize::Zeroizing::new(d.bytes().to_vec()))
            .unwrap_or_default();
        let sim = &mut *self.sim;
        let scope = sim.config().scope;
        let res = verify_and_commit(
            &mut sim.chain,
            &sim.registry,
            &mut sim.cores.mkm,
            Transaction {
                block,
                data: &data,
                intent,
            },
            scope,
        );
        let buf = &mut sim.cores.buffer;
        match res {
            Ok(Committed::Written { block_index, .. }) => {
                buf.take_pending();
                buf.take_payload();
                buf.advance_staged();
                self.transfers.push(TransferPath {
                    kind: TransferKind::Custom,
                    from: Endpoint::Source(SourceAddr::Buff),
                    to: Endpoint::Mkm,
                    payload_len: data.len(),
                    payload: None,
                });
                Ok(StepOutcome::Committed { block_index })
            }
            Ok(Committed::Read { block_index, granted }) => {
                buf.take_pending();
                let n = granted.value().len();
                buf.set_granted(granted);
                self.transfers.push(TransferPath {
                    kind: TransferKind::Custom,
                    from: Endpoint::Mkm,
                    to: Endpoint::Source(SourceAddr::Buff),
                    payload_len: n,
                    payload: None,
                });
                Ok(StepOutcome::Committed { block_index })
            }
            Err(event) => {
                buf.discard_transaction();
                let reason = event.reject_reason().expect("checker only emits rejections");
                sim.events.push(event);
                Ok(StepOutcome::Rejected(reason))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapath::program;
    use crate::sim::SimConfig;

    const SIGN: [u8; 5] = [17, 18, 19, 20, 21];

    fn sim() -> Simulator {
        Simulator::new(SimConfig::with_seed(1))
    }

    fn ops(seq: &[&[u8]]) -> Vec<Instruction> {
        program(&seq.concat()).unwrap()
    }

    #[test]
    fn empty_program_is_empty_trace() {
        let mut s = sim();
        let t = run_program(&mut s, &[]).unwrap();
        assert!(t.steps.is_empty());
        assert_eq!((t.total_ps(), s.now_ps()), (0, 0));
    }

    #[test]
    fn draw_lands_in_buffer() {
        let mut s = sim();
        let t = run_program(&mut s, &ops(&[&[1, 2]])).unwrap();
        let p = s.cores().buffer.payload().unwrap();
        assert_eq!((p.origin(), p.bytes().len()), (SourceAddr::Rng, 48));
        assert_eq!(t.steps[1].transfers[0].kind, TransferKind::Custom);
        assert!(t.steps[1].warnings[0].starts_with("CWR/route enable divergence: instr 2"));
        assert_eq!(s.events().len(), 1);
    }

    #[test]
    fn derive_before_any_write_fails() {
        let mut s = sim();
        let e = execute_instruction(&mut s, &Instruction::new(8).unwrap()).unwrap_err();
        assert_eq!(e.kind(), "precondition_violated");
        // The charge still lands.
        assert_eq!(s.now_ps(), latency_of(8, &s.config().latency));
    }

    #[test]
    fn generate_without_seed_fails() {
        let mut s = sim();
        let e = run_program(&mut s, &ops(&[&[2]])).unwrap_err();
        assert_eq!((e.step, e.error.kind()), (0, "precondition_violated"));
    }

    #[test]
    fn commit_unsigned_fails() {
        let mut s = sim();
        let e = run_program(&mut s, &ops(&[&[1, 2, 3, 21]])).unwrap_err();
        assert_eq!(e.step, 3);
        assert_eq!(e.trace.steps.len(), 3);
    }

    #[test]
    fn pre_master_write_commits() {
        let mut s = sim();
        let t = run_program(&mut s, &ops(&[&[1, 2, 3], &SIGN])).unwrap();
        assert_eq!(t.steps[7].outcome, StepOutcome::Committed { block_index: 1 });
        assert_eq!(s.chain().len(), 2);
        assert!(s.mkm().contains(1));
        assert_eq!(s.verify_chain(), Ok(()));
        assert_eq!(t.total_ps(), s.now_ps());
    }

    #[test]
    fn impostor_signature_is_rejected_without_side_effects() {
        let mut s = sim();
        run_program(&mut s, &ops(&[&[1, 2, 3], &SIGN[..4]])).unwrap();
        let mut s2 = sim();
        run_program(&mut s2, &ops(&[&[1, 2, 3, 17, 18]])).unwrap();
        s2.install_impostor(crate::sim::impostor_key(9));
        run_program(&mut s2, &ops(&[&[19, 20]])).unwrap();
        let before = s2.state_hash();
        let r = execute_instruction(&mut s2, &Instruction::new(21).unwrap()).unwrap();
        assert_eq!(r.outcome, StepOutcome::Rejected(RejectReason::SignatureMismatch));
        assert_eq!(s2.state_hash(), before);
        assert!(s2.cores().buffer.pending().is_none());
        assert_eq!(s.state_hash(), before);
    }

    #[test]
    fn read_operand_selects_key_id() {
        let mut s = sim();
        run_program(&mut s, &ops(&[&[1, 2, 3], &SIGN, &[6]])).unwrap();
        let i = Instruction::with_operand(7, vec![0, 9]).unwrap();
        execute_instruction(&mut s, &i).unwrap();
        assert_eq!(s.cores().buffer.pending().unwrap().block.key_id, 9);
        let r = run_program(&mut s, &ops(&[&SIGN])).unwrap();
        assert_eq!(r.steps[4].outcome, StepOutcome::Rejected(RejectReason::KeyNotFound));
        let long = Instruction::with_operand(7, vec![0; 9]).unwrap();
        assert_eq!(execute_instruction(&mut s, &long).unwrap_err().kind(), "bad_operand");
    }

    #[test]
    fn randoms_operand_length_checked() {
        let mut s = sim();
        let i = Instruction::with_operand(6, vec![1; 10]).unwrap();
        assert_eq!(execute_instruction(&mut s, &i).unwrap_err().kind(), "bad_operand");
    }

    #[test]
    fn aes_needs_a_key() {
        let mut s = sim();
        let i = Instruction::with_operand(13, b"hello".to_vec()).unwrap();
        assert_eq!(execute_instruction(&mut s, &i).unwrap_err().kind(), "no_key_loaded");
    }
}
