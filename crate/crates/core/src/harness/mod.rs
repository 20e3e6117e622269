//! Scenario runner, attack injectors, latency model and CLI.

mod attacks;
mod cli;
mod latency;
mod report;
mod runner;
mod scenario;

pub use attacks::{flip_bit, impostor_key, inject_tamper, OutOfRange};
pub use cli::{cli, EXIT_CHAIN, EXIT_IO, EXIT_OK, EXIT_SCENARIO};
pub use latency::{components, format_ns, latency_of, Component, LatencyModel, LatencyParseError};
pub use report::{LatencyReport, ReportRow};
pub use runner::{run_scenario, RunFailure, RunOptions, ScenarioRun};
pub use scenario::{Expect, Scenario, ScenarioParseError, Step, StepKind, ATTACKS, BUNDLED};
