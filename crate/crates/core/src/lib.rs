//! Simulator of a key-management security processor whose master key memory
//! is guarded by signed, hash-chained transactions.

pub mod cores;
pub mod crypto;
pub mod datapath;
pub mod harness;
pub mod ledger;
pub mod sim;

pub use sim::{SimConfig, Simulator};
