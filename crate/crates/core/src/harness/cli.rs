//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::latency::LatencyModel;
use super::runner::{run_scenario, RunOptions, ScenarioRun};
use super::scenario::{Scenario, ATTACKS};
use crate::cores::DestructionPolicy;
use crate::ledger::{
    audit_key, infer_catalog, load_chain, persist_chain, verify_chain, DumpError, SignatureScope,
};
use crate::sim::Genesis;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHAIN: i32 = 1;
pub const EXIT_SCENARIO: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "keyledger", version, about = "Key-management security processor simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the final chain dump here.
        #[arg(long)]
        chain_out: Option<PathBuf>,
        /// Latency model file (`component=value<unit>` lines).
        #[arg(long)]
        latency_model: Option<PathBuf>,
        /// Write the latency report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Verify a chain dump against the registry generated from a seed.
    VerifyChain {
        dump: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "full", value_parser = parse_scope)]
        sign_scope: SignatureScope,
    },
    /// Print the lifecycle of one key recorded in a chain dump.
    Audit {
        dump: PathBuf,
        #[arg(long)]
        key_id: u64,
    },
    /// Run a bundled adversarial scenario.
    Attack { name: String },
}

fn parse_scope(s: &str) -> Result<SignatureScope, String> {
    SignatureScope::parse(s).ok_or_else(|| format!("unknown scope `{s}` (full or data-only)"))
}

/// Parses `argv` (including the program name) and runs the command.
/// Diagnostics go to standard error; the return value is the exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match cli.cmd {
        Command::Run {
            scenario,
            seed,
            chain_out,
            latency_model,
            report,
        } => cmd_run(&scenario, seed, chain_out.as_deref(), latency_model.as_deref(), report.as_deref()),
        Command::VerifyChain { dump, seed, sign_scope } => cmd_verify(&dump, seed, sign_scope),
        Command::Audit { dump, key_id } => cmd_audit(&dump, key_id),
        Command::Attack { name } => {
            let key = name.replace('-', "_");
            let Some(sc) = ATTACKS.contains(&key.as_str()).then(|| Scenario::bundled(&key)).flatten() else {
                eprintln!("error: unknown attack `{name}` (one of: {})", ATTACKS.join(", "));
                return EXIT_IO;
            };
            let run = run_scenario(&sc, &RunOptions::default());
            summarize(&run)
        }
    }
}

fn io_err(what: &str, path: &Path, e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {what} {}: {e}", path.display());
    EXIT_IO
}

fn load_scenario(arg: &str) -> Result<Scenario, i32> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| io_err("reading", path, e))?;
        let name = path.file_stem().map_or(arg.into(), |s| s.to_string_lossy().into_owned());
        return Scenario::parse(&name, &text).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            EXIT_IO
        });
    }
    Scenario::bundled(arg).ok_or_else(|| {
        eprintln!("error: no scenario file or bundled scenario named `{arg}`");
        EXIT_IO
    })
}

fn cmd_run(
    scenario: &str,
    seed: Option<u64>,
    chain_out: Option<&Path>,
    latency_model: Option<&Path>,
    report: Option<&Path>,
) -> i32 {
    let sc = match load_scenario(scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let latency = match latency_model {
        None => None,
        Some(p) => {
            let text = match std::fs::read_to_string(p) {
                Ok(t) => t,
                Err(e) => return io_err("reading", p, e),
            };
            match LatencyModel::parse(&text) {
                Ok(m) => Some(m),
                Err(e) => return io_err("parsing", p, e),
            }
        }
    };
    let run = run_scenario(&sc, &RunOptions { seed, latency });
    if let Some(p) = chain_out {
        if let Err(e) = std::fs::write(p, persist_chain(run.sim.chain())) {
            return io_err("writing", p, e);
        }
    }
    let tsv = run.report.to_tsv();
    match report {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &tsv) {
                return io_err("writing", p, e);
            }
        }
        None => {
            let _ = std::io::stdout().write_all(tsv.as_bytes());
        }
    }
    summarize(&run)
}

fn summarize(run: &ScenarioRun) -> i32 {
    let sim = &run.sim;
    for e in sim.events() {
        eprintln!("audit t={}ns {:?}", e.timestamp_ns, e.kind);
    }
    if let Some(f) = &run.failure {
        eprintln!("{}: FAILED: {f}", run.scenario);
        return EXIT_SCENARIO;
    }
    if let Err(fault) = sim.verify_chain() {
        eprintln!("{}: chain verification failed: {fault}", run.scenario);
        return EXIT_CHAIN;
    }
    eprintln!(
        "{}: ok ({} blocks, {} keys in MKM, {} ns simulated)",
        run.scenario,
        sim.chain().len(),
        sim.mkm().len(),
        super::latency::format_ns(sim.now_ps())
    );
    EXIT_OK
}

fn read_dump(path: &Path) -> Result<crate::ledger::Chain, i32> {
    let bytes = std::fs::read(path).map_err(|e| io_err("reading", path, e))?;
    load_chain(&bytes).map_err(|DumpError::MalformedDump(m)| {
        eprintln!("{}: malformed dump: {m}", path.display());
        EXIT_CHAIN
    })
}

fn cmd_verify(path: &Path, seed: u64, scope: SignatureScope) -> i32 {
    let chain = match read_dump(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let registry = Genesis::cached(seed).registry();
    match verify_chain(&chain, &registry, scope) {
        Ok(()) => {
            println!("ok: {} blocks verified", chain.len());
            EXIT_OK
        }
        Err(f) => {
            println!("first bad block: {} ({} check)", f.index, f.check);
            EXIT_CHAIN
        }
    }
}

fn cmd_audit(path: &Path, key_id: u64) -> i32 {
    let chain = match read_dump(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let catalog = infer_catalog(&chain, &DestructionPolicy::default());
    let trace = match audit_key(&chain, key_id, &catalog) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let ty = trace.meta.map_or("unknown", |m| m.key_type.name());
    println!("key {key_id} ({ty})");
    for e in &trace.entries {
        println!(
            "  block {}\tt={}ns\t{}\t{:?} -> {:?}",
            e.index,
            e.timestamp_ns,
            e.op.name(),
            e.source,
            e.dest
        );
    }
    if trace.non_destruction {
        println!("NON-DESTRUCTION: single-use key written and never read");
    }
    EXIT_OK
}
