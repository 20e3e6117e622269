//! Data path controller and custom bus interconnect.

mod cwr;
mod exec;
mod instruction;
mod router;

pub use cwr::{decode_cwr, decode_masked, encode_cwr, ControlWord, CwrError, COMMIT_MASK};
pub use exec::{
    execute_instruction, run_program, ExecError, ProgramError, ProgramTrace, StepOutcome, StepReport,
};
pub use instruction::{
    instruction_spec, program, Bus, CwrSpec, Flow, Instruction, InstructionSpec, UnknownOpcode,
    INSTRUCTION_SET,
};
pub use router::{cbi_route, Endpoint, RouteError, TransferKind, TransferPath};
