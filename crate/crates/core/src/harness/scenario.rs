//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! seed 42
//! config sign-scope=data-only
//! config destroy.master=true
//! instr 13 48656c6c6f expect=ok
//! instr 21 expect=rejected:signer_mismatch
//! spoof-key
//! dump-chain
//! inject-tamper 1234
//! verify-dump expect=error:tamper_detected
//! replay-block 1
//! check destroyed 1
//! check live 2
//! check non-destruction 3
//! ```

use thiserror::Error;

use crate::cores::{DestructionPolicy, KeyType};
use crate::datapath::Instruction;
use crate::ledger::SignatureScope;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expect {
    Ok,
    /// Rejected by the signature checker, optionally for a given reason code.
    Rejected(Option<String>),
    /// Failed with the given error kind.
    Error(String),
}

impl Expect {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(Self::Ok),
            "rejected" => Some(Self::Rejected(None)),
            _ => {
                if let Some(r) = s.strip_prefix("rejected:") {
                    Some(Self::Rejected(Some(r.to_string())))
                } else {
                    s.strip_prefix("error:")
                        .filter(|k| !k.is_empty())
                        .map(|k| Self::Error(k.to_string()))
                }
            }
        }
    }

    /// Whether an observed outcome label (`ok`, `rejected:<code>`,
    /// `error:<kind>`) satisfies this expectation.
    pub fn matches(&self, observed: &str) -> bool {
        match self {
            Self::Ok => observed == "ok",
            Self::Rejected(None) => observed.starts_with("rejected:"),
            Self::Rejected(Some(r)) => observed.strip_prefix("rejected:") == Some(r.as_str()),
            Self::Error(k) => observed.strip_prefix("error:") == Some(k.as_str()),
        }
    }
}

impl std::fmt::Display for Expect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ok => f.write_str("ok"),
            Self::Rejected(None) => f.write_str("rejected"),
            Self::Rejected(Some(r)) => write!(f, "rejected:{r}"),
            Self::Error(k) => write!(f, "error:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepKind {
    Instr(Instruction),
    /// Next signature is made with a key outside the registry.
    SpoofKey { seed: Option<u64> },
    DumpChain,
    InjectTamper { bit: u64 },
    VerifyDump,
    ReplayBlock { index: u64 },
    CheckDestroyed { key_id: u64 },
    CheckLive { key_id: u64 },
    /// Audit flags the key as written but never consumed.
    CheckNonDestruction { key_id: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub kind: StepKind,
    pub expect: Expect,
}

impl Step {
    pub fn label(&self) -> String {
        match &self.kind {
            StepKind::Instr(i) => format!("instr {}", i.opcode()),
            StepKind::SpoofKey { .. } => "spoof-key".into(),
            StepKind::DumpChain => "dump-chain".into(),
            StepKind::InjectTamper { bit } => format!("inject-tamper {bit}"),
            StepKind::VerifyDump => "verify-dump".into(),
            StepKind::ReplayBlock { index } => format!("replay-block {index}"),
            StepKind::CheckDestroyed { key_id } => format!("check destroyed {key_id}"),
            StepKind::CheckLive { key_id } => format!("check live {key_id}"),
            StepKind::CheckNonDestruction { key_id } => format!("check non-destruction {key_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub policy: DestructionPolicy,
    pub scope: SignatureScope,
    pub steps: Vec<Step>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ScenarioParseError {
    pub line: usize,
    pub msg: String,
}

fn parse_u64(s: &str) -> Option<u64> {
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

/// Splits on whitespace, keeping "quoted text" (quotes included) as one
/// token. `#` outside quotes starts a comment.
fn tokenize(line: &str) -> Result<Vec<&str>, String> {
    let mut toks = Vec::new();
    let mut start = None;
    let mut quoted = false;
    let mut end = line.len();
    for (i, c) in line.char_indices() {
        if c == '"' {
            quoted = !quoted;
        } else if !quoted && c == '#' {
            end = i;
            break;
        } else if !quoted && c.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push(&line[s..i]);
            }
            continue;
        }
        start.get_or_insert(i);
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    if let Some(s) = start {
        toks.push(&line[s..end]);
    }
    Ok(toks)
}

fn parse_operand(s: &str) -> Result<Vec<u8>, String> {
    if let Some(text) = s.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        return Ok(text.as_bytes().to_vec());
    }
    let h = s.strip_prefix("0x").unwrap_or(s);
    hex::decode(h).map_err(|e| format!("operand `{s}`: {e}"))
}

impl Scenario {
    pub fn parse(name: &str, text: &str) -> Result<Self, ScenarioParseError> {
        let mut sc = Scenario {
            name: name.to_string(),
            seed: 0,
            policy: DestructionPolicy::default(),
            scope: SignatureScope::default(),
            steps: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| ScenarioParseError { line, msg };
            let mut toks = tokenize(raw).map_err(err)?;
            if toks.is_empty() {
                continue;
            }
            let mut expect = Expect::Ok;
            if let Some(pos) = toks.iter().position(|t| t.starts_with("expect=")) {
                let e = toks.remove(pos);
                expect = Expect::parse(&e["expect=".len()..])
                    .ok_or_else(|| err(format!("bad expectation `{e}`")))?;
            }
            let num = |idx: usize, what: &str| -> Result<u64, ScenarioParseError> {
                toks.get(idx)
                    .and_then(|t| parse_u64(t))
                    .ok_or_else(|| err(format!("`{}` needs a numeric {what}", toks[0])))
            };
            let arity = |n: usize| -> Result<(), ScenarioParseError> {
                if toks.len() > n {
                    Err(err(format!("unexpected token `{}`", toks[n])))
                } else {
                    Ok(())
                }
            };
            let kind = match toks[0] {
                "seed" => {
                    sc.seed = num(1, "seed")?;
                    arity(2)?;
                    continue;
                }
                "config" => {
                    arity(2)?;
                    let kv = toks.get(1).ok_or_else(|| err("`config` needs key=value".into()))?;
                    let (k, v) = kv.split_once('=').ok_or_else(|| err(format!("bad config `{kv}`")))?;
                    if k == "sign-scope" {
                        sc.scope = SignatureScope::parse(v).ok_or_else(|| err(format!("bad scope `{v}`")))?;
                    } else if let Some(t) = k.strip_prefix("destroy.") {
                        let t = KeyType::parse(t).ok_or_else(|| err(format!("unknown key type `{t}`")))?;
                        let on = match v {
                            "true" => true,
                            "false" => false,
                            _ => return Err(err(format!("bad flag `{v}`"))),
                        };
                        sc.policy.set(t, on);
                    } else {
                        return Err(err(format!("unknown config key `{k}`")));
                    }
                    continue;
                }
                "instr" => {
                    let op = num(1, "opcode")?;
                    arity(3)?;
                    let op = u8::try_from(op).map_err(|_| err(format!("opcode {op} out of range")))?;
                    let i = match toks.get(2) {
                        Some(o) => Instruction::with_operand(op, parse_operand(o).map_err(err)?),
                        None => Instruction::new(op),
                    };
                    StepKind::Instr(i.map_err(|e| err(e.to_string()))?)
                }
                "spoof-key" => {
                    arity(2)?;
                    let seed = if toks.len() > 1 { Some(num(1, "seed")?) } else { None };
                    StepKind::SpoofKey { seed }
                }
                "dump-chain" => {
                    arity(1)?;
                    StepKind::DumpChain
                }
                "inject-tamper" => {
                    let bit = num(1, "bit index")?;
                    arity(2)?;
                    StepKind::InjectTamper { bit }
                }
                "verify-dump" => {
                    arity(1)?;
                    StepKind::VerifyDump
                }
                "replay-block" => {
                    let index = num(1, "block index")?;
                    arity(2)?;
                    StepKind::ReplayBlock { index }
                }
                "check" => {
                    let key_id = num(2, "key id")?;
                    arity(3)?;
                    match toks[1] {
                        "destroyed" => StepKind::CheckDestroyed { key_id },
                        "live" => StepKind::CheckLive { key_id },
                        "non-destruction" => StepKind::CheckNonDestruction { key_id },
                        w => return Err(err(format!("unknown check `{w}`"))),
                    }
                }
                w => return Err(err(format!("unknown directive `{w}`"))),
            };
            sc.steps.push(Step { line, kind, expect });
        }
        Ok(sc)
    }

    /// A bundled scenario by name (hyphens and underscores are equivalent).
    pub fn bundled(name: &str) -> Option<Self> {
        let key = name.replace('-', "_");
        let (n, text) = BUNDLED.iter().find(|(n, _)| *n == key)?;
        Some(Self::parse(n, text).expect("bundled scenarios parse"))
    }
}

pub const BUNDLED: [(&str, &str); 6] = [
    ("tls_lifecycle", include_str!("../../scenarios/tls_lifecycle.scn")),
    ("spoofed_requestee", include_str!("../../scenarios/spoofed_requestee.scn")),
    ("tampered_chain", include_str!("../../scenarios/tampered_chain.scn")),
    ("wrong_key_type", include_str!("../../scenarios/wrong_key_type.scn")),
    ("skipped_destruction", include_str!("../../scenarios/skipped_destruction.scn")),
    ("replay_block", include_str!("../../scenarios/replay_block.scn")),
];

/// Names of the adversarial bundled scenarios.
pub const ATTACKS: [&str; 5] = [
    "spoofed_requestee",
    "tampered_chain",
    "wrong_key_type",
    "skipped_destruction",
    "replay_block",
];
