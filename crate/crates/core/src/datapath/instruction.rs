//! The 21-instruction set of the data path controller.

use std::fmt;

use thiserror::Error;

use super::cwr::COMMIT_MASK;
use crate::cores::{CoreEnables, DestAddr, SourceAddr};

/// Bus an instruction's transfer travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bus {
    Axi,
    Custom,
    Dma,
}

/// Where an instruction moves data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// PE-issued call straight to a core; no interconnect routing.
    Processor { core: &'static str },
    /// Interconnect transfer between two ports.
    Route { source: SourceAddr, dest: DestAddr },
    /// Block composition in the buffer. For reads, `dest` names the key
    /// port the block requests delivery to.
    BlockGen { source: SourceAddr, dest: DestAddr },
    /// Core reads and writes shared memory.
    Shared { core: &'static str },
    /// Signature check and MKM commit.
    Commit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwrSpec {
    pub value: u16,
    /// Bits that carry meaning; the rest are don't-cares.
    pub mask: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstructionSpec {
    pub opcode: u8,
    pub name: &'static str,
    pub category: &'static str,
    pub flow: Flow,
    pub cwr: Option<CwrSpec>,
    pub bus: Bus,
    /// Cores that must be enabled for the routed path.
    pub required: CoreEnables,
    /// Whether the routed path goes through the interconnect.
    pub needs_cbi: bool,
}

const fn cwr(value: u16) -> Option<CwrSpec> {
    Some(CwrSpec { value, mask: 0xFFFF })
}

const E_BUFF: CoreEnables = CoreEnables::BUFF;
const E_MKM: CoreEnables = CoreEnables::MKM;
const E_ENC: CoreEnables = CoreEnables::ENC;
const E_HASH: CoreEnables = CoreEnables::HASH;
const E_RNG: CoreEnables = CoreEnables::RNG;
const E_RSA: CoreEnables = CoreEnables::RSA;

const fn union(a: CoreEnables, b: CoreEnables) -> CoreEnables {
    CoreEnables::from_bits_truncate(a.bits() | b.bits())
}

macro_rules! ins {
    ($op:expr, $name:expr, $cat:expr, $flow:expr, $cwr:expr, $bus:ident, $req:expr, $cbi:expr) => {
        InstructionSpec {
            opcode: $op,
            name: $name,
            category: $cat,
            flow: $flow,
            cwr: $cwr,
            bus: Bus::$bus,
            required: $req,
            needs_cbi: $cbi,
        }
    };
}

use DestAddr as D;
use SourceAddr as S;

pub static INSTRUCTION_SET: [InstructionSpec; 21] = [
    ins!(1, "PE Send Re-Seed", "pre-master", Flow::Processor { core: "RNG" }, cwr(0x0010), Axi, E_RNG, false),
    ins!(2, "Gen RND", "pre-master", Flow::Route { source: S::Rng, dest: D::Buff }, cwr(0x0050), Custom, union(E_RNG, E_BUFF), true),
    ins!(3, "RNG Write Block Gen", "pre-master", Flow::BlockGen { source: S::Rng, dest: D::Buff }, cwr(0x0091), Custom, E_BUFF, true),
    ins!(4, "Re-Key RSA", "pre-master", Flow::Processor { core: "RSA" }, cwr(0x0020), Axi, E_RSA, false),
    ins!(5, "PE Get En-RNG", "pre-master", Flow::Processor { core: "RSA" }, None, Axi, E_RSA, false),
    ins!(6, "PE Send Rands in Hash", "master", Flow::Processor { core: "Hash" }, None, Axi, E_HASH, false),
    ins!(7, "Hash Read Block Gen", "master", Flow::BlockGen { source: S::Buff, dest: D::HashKey }, cwr(0x11C1), Custom, E_BUFF, true),
    ins!(8, "Get M-Key Hash", "master", Flow::Route { source: S::Buff, dest: D::HashKey }, cwr(0x1149), Custom, union(E_BUFF, E_HASH), true),
    ins!(9, "Gen Keys", "master", Flow::Route { source: S::Hash, dest: D::Buff }, cwr(0x2049), Custom, union(E_HASH, E_BUFF), true),
    ins!(10, "Hash Write Block Gen", "master", Flow::BlockGen { source: S::Hash, dest: D::Buff }, cwr(0x20C9), Custom, E_BUFF, true),
    ins!(11, "En Read Block Gen", "encryption", Flow::BlockGen { source: S::Buff, dest: D::EnKey }, cwr(0x12C1), Custom, E_BUFF, true),
    ins!(12, "Get EN Key from Buff", "encryption", Flow::Route { source: S::Buff, dest: D::EnKey }, cwr(0x1245), Dma, union(E_BUFF, E_ENC), true),
    ins!(13, "GEN EN", "encryption", Flow::Shared { core: "Enc" }, None, Custom, E_ENC, false),
    ins!(14, "Hash Read Block Gen", "hash", Flow::BlockGen { source: S::Buff, dest: D::HashKey }, cwr(0x11C1), Custom, E_BUFF, true),
    ins!(15, "Get Key Hash", "hash", Flow::Route { source: S::Buff, dest: D::HashKey }, cwr(0x1149), Custom, union(E_BUFF, E_HASH), true),
    ins!(16, "GEN Hash", "hash", Flow::Shared { core: "Hash" }, None, Dma, E_HASH, false),
    ins!(17, "Hash of Buff", "signature", Flow::Route { source: S::Buff, dest: D::HashIn }, cwr(0x1341), Custom, union(E_BUFF, E_HASH), true),
    ins!(18, "Hash to Buff", "signature", Flow::Route { source: S::Hash, dest: D::Buff }, cwr(0x2049), Custom, union(E_HASH, E_BUFF), true),
    ins!(19, "PubEn of Buff", "signature", Flow::Route { source: S::Buff, dest: D::PubEnIn }, cwr(0x1461), Custom, union(E_BUFF, E_RSA), true),
    ins!(20, "PubEn to Buff", "signature", Flow::Route { source: S::PubEn, dest: D::Buff }, cwr(0x3061), Custom, union(E_RSA, E_BUFF), true),
    ins!(21, "Verify Sig", "signature", Flow::Commit, Some(CwrSpec { value: 0x1003, mask: COMMIT_MASK }), Custom, union(E_MKM, E_BUFF), false),
];

pub fn instruction_spec(opcode: u8) -> Option<&'static InstructionSpec> {
    INSTRUCTION_SET.get(usize::from(opcode).checked_sub(1)?)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("opcode {0} is not in 1..=21")]
pub struct UnknownOpcode(pub u8);

/// One issued instruction with its optional operand bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct Instruction {
    opcode: u8,
    operand: Option<Vec<u8>>,
}

impl fmt::Debug for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instr {}", self.opcode)?;
        if let Some(op) = &self.operand {
            write!(f, " <{} bytes>", op.len())?;
        }
        Ok(())
    }
}

impl Instruction {
    pub fn new(opcode: u8) -> Result<Self, UnknownOpcode> {
        instruction_spec(opcode).ok_or(UnknownOpcode(opcode))?;
        Ok(Self {
            opcode,
            operand: None,
        })
    }

    pub fn with_operand(opcode: u8, operand: Vec<u8>) -> Result<Self, UnknownOpcode> {
        let mut i = Self::new(opcode)?;
        i.operand = Some(operand);
        Ok(i)
    }

    pub fn opcode(&self) -> u8 {
        self.opcode
    }

    pub fn operand(&self) -> Option<&[u8]> {
        self.operand.as_deref()
    }

    pub fn spec(&self) -> &'static InstructionSpec {
        instruction_spec(self.opcode).expect("validated on construction")
    }
}

/// Shorthand for a list of operand-less instructions.
pub fn program(opcodes: &[u8]) -> Result<Vec<Instruction>, UnknownOpcode> {
    opcodes.iter().map(|&o| Instruction::new(o)).collect()
}
