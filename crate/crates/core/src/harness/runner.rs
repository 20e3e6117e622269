//! Executes scenarios and checks every step against its expectation.

use thiserror::Error;

use super::attacks::{flip_bit, impostor_key};
use super::latency::LatencyModel;
use super::report::{LatencyReport, ReportRow};
use super::scenario::{Expect, Scenario, Step, StepKind};
use crate::datapath::{execute_instruction, StepOutcome};
use crate::ledger::audit_key;
use crate::sim::{SimConfig, Simulator};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub latency: Option<LatencyModel>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunFailure {
    #[error("step {step} (line {line}, {label}): expected {expected}, got {observed}")]
    ExpectationMismatch {
        step: usize,
        line: usize,
        label: String,
        expected: Expect,
        observed: String,
    },
    #[error("step {step} (line {line}): rejected transaction changed chain or MKM state")]
    RejectionSideEffect { step: usize, line: usize },
    #[error("step {step} (line {line}): live key bytes in processor memory at {addr:#x}")]
    Taint { step: usize, line: usize, addr: u32 },
    #[error("latency report total {report_ps} ps differs from simulated time {timer_ps} ps")]
    LatencyDrift { report_ps: u64, timer_ps: u64 },
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub scenario: String,
    pub sim: Simulator,
    pub report: LatencyReport,
    /// First failed check; the run stops there.
    pub failure: Option<RunFailure>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs `scenario` on a fresh simulator.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> ScenarioRun {
    let seed = opts.seed.unwrap_or(scenario.seed);
    let config = SimConfig {
        seed,
        latency: opts.latency.unwrap_or_default(),
        policy: scenario.policy,
        scope: scenario.scope,
    };
    let mut run = ScenarioRun {
        scenario: scenario.name.clone(),
        sim: Simulator::new(config),
        report: LatencyReport::default(),
        failure: None,
    };
    let mut spoofs = 0u64;
    for (idx, step) in scenario.steps.iter().enumerate() {
        if let Err(f) = run_step(&mut run, idx, step, &mut spoofs) {
            run.failure = Some(f);
            return run;
        }
    }
    let timer_ps = run.sim.now_ps();
    if run.report.total_ps() != timer_ps {
        run.failure = Some(RunFailure::LatencyDrift {
            report_ps: run.report.total_ps(),
            timer_ps,
        });
    }
    run
}

fn run_step(run: &mut ScenarioRun, idx: usize, step: &Step, spoofs: &mut u64) -> Result<(), RunFailure> {
    let sim = &mut run.sim;
    let before = sim.state_hash();
    let (opcode, observed) = match &step.kind {
        StepKind::Instr(i) => (
            Some(i.opcode()),
            match execute_instruction(sim, i) {
                Ok(r) => match r.outcome {
                    StepOutcome::Rejected(reason) => format!("rejected:{}", reason.code()),
                    _ => "ok".to_string(),
                },
                Err(e) => format!("error:{}", e.kind()),
            },
        ),
        StepKind::SpoofKey { seed } => {
            let s = seed.unwrap_or_else(|| sim.config().seed.wrapping_add(*spoofs));
            *spoofs += 1;
            sim.install_impostor(impostor_key(s));
            (None, "ok".into())
        }
        StepKind::DumpChain => (None, outcome(sim.dump_chain().map_err(|e| e.kind().to_string()))),
        StepKind::InjectTamper { bit } => {
            let r = match sim.chain_dump_mut() {
                None => Err("no_dump".to_string()),
                Some(d) => flip_bit(d, *bit).map_err(|_| "out_of_range".to_string()),
            };
            (None, outcome(r))
        }
        StepKind::VerifyDump => {
            let r = sim.verify_chain_dump().map_err(|e| match e {
                crate::sim::DumpCheckError::NoDump => "no_dump".to_string(),
                _ => "tamper_detected".to_string(),
            });
            (None, outcome(r))
        }
        StepKind::ReplayBlock { index } => {
            (None, outcome(sim.replay_block(*index).map_err(|e| e.kind().to_string())))
        }
        StepKind::CheckDestroyed { key_id } => {
            let r = match sim.mkm().get(*key_id) {
                Some(k) if k.destroyed() => Ok(()),
                Some(_) => Err("key_live".to_string()),
                None => Err("key_not_found".to_string()),
            };
            (None, outcome(r))
        }
        StepKind::CheckLive { key_id } => {
            let r = match sim.mkm().get(*key_id) {
                Some(k) if !k.destroyed() => Ok(()),
                Some(_) => Err("key_destroyed".to_string()),
                None => Err("key_not_found".to_string()),
            };
            (None, outcome(r))
        }
        StepKind::CheckNonDestruction { key_id } => {
            let r = match audit_key(sim.chain(), *key_id, &sim.mkm().catalog()) {
                Ok(t) if t.non_destruction => Ok(()),
                Ok(_) => Err("not_flagged".to_string()),
                Err(_) => Err("key_not_found".to_string()),
            };
            (None, outcome(r))
        }
    };
    let model = sim.config().latency;
    run.report.rows.push(ReportRow::new(
        idx,
        step.line,
        step.label(),
        opcode,
        observed.clone(),
        &model,
    ));

    if let Some(addr) = sim.cores().taint_scan() {
        return Err(RunFailure::Taint {
            step: idx,
            line: step.line,
            addr,
        });
    }
    if observed.starts_with("rejected:") && sim.state_hash() != before {
        return Err(RunFailure::RejectionSideEffect {
            step: idx,
            line: step.line,
        });
    }
    if !step.expect.matches(&observed) {
        return Err(RunFailure::ExpectationMismatch {
            step: idx,
            line: step.line,
            label: step.label(),
            expected: step.expect.clone(),
            observed,
        });
    }
    Ok(())
}

fn outcome(r: Result<(), String>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(k) => format!("error:{k}"),
    }
}
