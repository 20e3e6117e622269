#![allow(dead_code)]

use keyledger::datapath::Instruction;
use keyledger::harness::{run_scenario, RunOptions, Scenario, ScenarioRun, StepKind};

pub fn lifecycle() -> Scenario {
    Scenario::bundled("tls_lifecycle").expect("bundled")
}

pub fn run_lifecycle() -> ScenarioRun {
    run_scenario(&lifecycle(), &RunOptions::default())
}

/// The instruction stream of the lifecycle scenario, without its checks.
pub fn lifecycle_instrs() -> Vec<Instruction> {
    lifecycle()
        .steps
        .into_iter()
        .filter_map(|s| match s.kind {
            StepKind::Instr(i) => Some(i),
            _ => None,
        })
        .collect()
}
