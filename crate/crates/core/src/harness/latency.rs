//! Per-component latency charges, kept in picoseconds so 67.2 ns is exact.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    MkmAccess,
    PathController,
    RsaOp,
    KeccakOp,
    RngOp,
    AesOp,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Self::MkmAccess,
        Self::PathController,
        Self::RsaOp,
        Self::KeccakOp,
        Self::RngOp,
        Self::AesOp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MkmAccess => "mkm_access",
            Self::PathController => "path_controller",
            Self::RsaOp => "rsa_op",
            Self::KeccakOp => "keccak_op",
            Self::RngOp => "rng_op",
            Self::AesOp => "aes_op",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatencyModel {
    pub mkm_access_ps: u64,
    pub path_controller_ps: u64,
    pub rsa_op_ps: u64,
    pub keccak_op_ps: u64,
    pub rng_op_ps: u64,
    pub aes_op_ps: u64,
}

/// Measured FPGA figures: 20 ns, 10 ns, 86 us, 67.2 ns.
impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            mkm_access_ps: 20_000,
            path_controller_ps: 10_000,
            rsa_op_ps: 86_000_000,
            keccak_op_ps: 67_200,
            rng_op_ps: 0,
            aes_op_ps: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatencyParseError {
    #[error("line {line}: expected `<component>=<value><unit>`")]
    Syntax { line: usize },
    #[error("line {line}: unknown component `{name}`")]
    UnknownComponent { line: usize, name: String },
    #[error("line {line}: bad value `{value}` (non-negative decimal with unit ns, us or ps)")]
    BadValue { line: usize, value: String },
    #[error("line {line}: `{value}` is not a whole number of picoseconds")]
    SubPicosecond { line: usize, value: String },
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self {
            mkm_access_ps: 0,
            path_controller_ps: 0,
            rsa_op_ps: 0,
            keccak_op_ps: 0,
            rng_op_ps: 0,
            aes_op_ps: 0,
        }
    }

    pub fn get(&self, c: Component) -> u64 {
        match c {
            Component::MkmAccess => self.mkm_access_ps,
            Component::PathController => self.path_controller_ps,
            Component::RsaOp => self.rsa_op_ps,
            Component::KeccakOp => self.keccak_op_ps,
            Component::RngOp => self.rng_op_ps,
            Component::AesOp => self.aes_op_ps,
        }
    }

    pub fn set(&mut self, c: Component, ps: u64) {
        let slot = match c {
            Component::MkmAccess => &mut self.mkm_access_ps,
            Component::PathController => &mut self.path_controller_ps,
            Component::RsaOp => &mut self.rsa_op_ps,
            Component::KeccakOp => &mut self.keccak_op_ps,
            Component::RngOp => &mut self.rng_op_ps,
            Component::AesOp => &mut self.aes_op_ps,
        };
        *slot = ps;
    }

    /// Parses `component=value<unit>` lines over the defaults. Blank lines
    /// and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, LatencyParseError> {
        let mut m = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (name, value) = l.split_once('=').ok_or(LatencyParseError::Syntax { line })?;
            let (name, value) = (name.trim(), value.trim());
            let c = Component::parse(name).ok_or_else(|| LatencyParseError::UnknownComponent {
                line,
                name: name.to_string(),
            })?;
            m.set(c, parse_duration_ps(value, line)?);
        }
        Ok(m)
    }
}

impl FromStr for LatencyModel {
    type Err = LatencyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

fn parse_duration_ps(value: &str, line: usize) -> Result<u64, LatencyParseError> {
    let bad = || LatencyParseError::BadValue {
        line,
        value: value.to_string(),
    };
    let (num, scale) = [("ns", 1_000u64), ("us", 1_000_000), ("ps", 1)]
        .iter()
        .find_map(|(u, s)| value.strip_suffix(u).map(|n| (n.trim(), *s)))
        .ok_or_else(bad)?;
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let mut ps = int
        .parse::<u64>()
        .ok()
        .and_then(|v| v.checked_mul(scale))
        .ok_or_else(bad)?;
    let mut place = scale;
    for d in frac.bytes() {
        let digit = u64::from(d - b'0');
        if place % 10 != 0 {
            if digit != 0 {
                return Err(LatencyParseError::SubPicosecond {
                    line,
                    value: value.to_string(),
                });
            }
            continue;
        }
        place /= 10;
        ps = ps.checked_add(digit * place).ok_or_else(bad)?;
    }
    Ok(ps)
}

/// Components charged by one instruction.
pub fn components(opcode: u8) -> &'static [Component] {
    use Component::*;
    match opcode {
        1 | 4 | 9 | 12 | 18 => &[PathController],
        2 => &[PathController, RngOp],
        3 | 7 | 10 | 11 | 14 => &[PathController, KeccakOp],
        5 => &[RsaOp],
        8 | 15 => &[PathController, KeccakOp],
        13 => &[AesOp],
        16 => &[KeccakOp],
        17 => &[PathController, KeccakOp],
        19 | 20 => &[PathController, RsaOp],
        21 => &[PathController, RsaOp, KeccakOp, MkmAccess],
        _ => &[],
    }
}

/// Charge for one instruction, in picoseconds.
pub fn latency_of(opcode: u8, model: &LatencyModel) -> u64 {
    components(opcode).iter().map(|&c| model.get(c)).sum()
}

/// Picoseconds as nanoseconds with one decimal.
pub fn format_ns(ps: u64) -> String {
    let tenths = (ps + 50) / 100;
    format!("{}.{}", tenths / 10, tenths % 10)
}
