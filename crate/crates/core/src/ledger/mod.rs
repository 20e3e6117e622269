//! Hash-chained audit log of MKM transactions and the signature checker
//! that gates them.

mod audit;
mod block;
mod chain;
mod checker;
mod dump;
#[cfg(test)]
pub(crate) mod fixtures;
mod registry;

pub use audit::{audit_key, infer_catalog, written_key_ids, AuditError, KeyTrace, TraceEntry};
pub use block::{commit_data, commitment_preimage, Block, BlockOp, SignatureScope, COMMIT_TAG, RECORD_LEN};
pub use chain::{verify_chain, Chain, ChainCheck, ChainFault};
pub use checker::{
    compose_block, sign_block, verify_and_commit, AuditEvent, AuditKind, BlockRequest, Committed,
    GrantToken, LedgerError, RejectReason, Transaction,
};
pub use dump::{load_chain, persist_chain, DumpError, HEADER_LEN, MAGIC, VERSION};
pub use registry::{requestee, IpRegistry};
