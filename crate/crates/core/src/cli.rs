//! Command-line front end.  Exit codes follow sysexits: 64 for usage and
//! bounds errors, 65 for unparsable programs, 66 for unreadable files.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calculus::{parse_program, Program};
use crate::explorer::{explore_protocol, explore_system, ExploreError, Mode, ProtocolBounds, SystemBounds};
use crate::ll::{ConfigLL, LlFault};
use crate::protocol::ProtocolFault;
use crate::runtime::{trace_line, Outcome, System};

pub const EX_USAGE: i32 = 64;
pub const EX_DATAERR: i32 = 65;
pub const EX_NOINPUT: i32 = 66;
pub const EX_IOERR: i32 = 74;

#[derive(Parser, Debug)]
#[command(name = "rcsp", version, about = "Run and check reversible communicating processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a program with one thread per process and print its trace.
    Run {
        file: PathBuf,
        /// Seconds before giving up.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also print silent steps.
        #[arg(long)]
        verbose: bool,
        /// Write the full step log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Explore a program's state space, or the channel protocol without one.
    Explore {
        file: Option<PathBuf>,
        #[command(flatten)]
        proto: ProtoArgs,
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustively check the channel protocol invariants.
    CheckProtocol {
        #[command(flatten)]
        proto: ProtoArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Check every low-level step of a program against the reference semantics.
    CheckRefinement {
        file: PathBuf,
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Syntax check only.
    Parse { file: PathBuf },
}

#[derive(Args, Debug)]
struct ProtoArgs {
    #[arg(long, default_value_t = 4)]
    time_bound: u64,
    #[arg(long, default_value_t = 2)]
    values: i64,
    /// Hash states up to order-isomorphism of their timestamps.
    #[arg(long)]
    canonical: bool,
}

#[derive(Args, Debug)]
struct SysArgs {
    #[arg(long, default_value_t = 40)]
    depth: usize,
    #[arg(long, default_value_t = 1)]
    k: u64,
    #[arg(long, value_enum, default_value_t = CliMode::Free)]
    mode: CliMode,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_enum)]
    inject_fault: Option<Fault>,
    /// Also write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fault {
    T2,
    T5,
    T7,
    L3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliMode {
    Free,
    Policy,
}

struct Failure(i32, String);

type Res = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EX_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.cmd, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "rcsp: {msg}");
            code
        }
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    match cmd {
        Cmd::Run { file, timeout, seed, verbose, log } => run(&file, timeout, seed, verbose, log.as_deref(), out),
        Cmd::Explore { file: None, proto, common, .. } | Cmd::CheckProtocol { proto, common } => check_protocol(&proto, &common, out),
        Cmd::Explore { file: Some(file), sys, common, .. } | Cmd::CheckRefinement { file, sys, common } => {
            check_system(&file, &sys, &common, out, err)
        }
        Cmd::Parse { file } => {
            let p = load(&file)?;
            emit(out, &format!("ok: {} channels, {} processes\n", p.channels.len(), p.processes.len()))?;
            Ok(0)
        }
    }
}

fn load(path: &Path) -> Result<Program, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(EX_NOINPUT, format!("{}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| Failure(EX_DATAERR, format!("{}:{e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure(EX_IOERR, e.to_string()))
}

fn save(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure(EX_IOERR, format!("{}: {e}", p.display()))),
        None => Ok(()),
    }
}

fn run(file: &Path, timeout: f64, seed: u64, verbose: bool, log: Option<&Path>, out: &mut dyn Write) -> Res {
    let program = load(file)?;
    let timeout = Duration::try_from_secs_f64(timeout).map_err(|e| Failure(EX_USAGE, format!("--timeout: {e}")))?;
    let mut sys = System::spawn(&program, seed).map_err(|e| Failure(EX_IOERR, e.to_string()))?;
    let outcome = sys.run(timeout);
    let entries = sys.log();
    let mut text = String::new();
    for e in &entries {
        if let Some(line) = trace_line(e, verbose) {
            text.push_str(&line);
            text.push('\n');
        }
    }
    if let Some(path) = log {
        let full: String = entries.iter().map(|e| format!("{}\t{}\n", e.seq, e.rule)).collect();
        save(Some(path), &full)?;
    }
    let code = match &outcome {
        Outcome::Terminated { values } => {
            for (p, v) in values {
                text.push_str(&format!("result {p} {v}\n"));
            }
            0
        }
        Outcome::Timeout => {
            text.push_str("timeout\n");
            2
        }
        Outcome::Stuck { dump } => {
            text.push_str(&format!("stuck\n{dump}\n"));
            3
        }
    };
    emit(out, &text)?;
    Ok(code)
}

fn check_protocol(a: &ProtoArgs, c: &Common, out: &mut dyn Write) -> Res {
    let fault = match c.inject_fault {
        None => None,
        Some(Fault::T2) => Some(ProtocolFault::T2NoSync),
        Some(Fault::T5) => Some(ProtocolFault::T5NoSync),
        Some(Fault::T7) => Some(ProtocolFault::T7NoSync),
        Some(Fault::L3) => return Err(Failure(EX_USAGE, "l3 is a program-level fault; use check-refinement".into())),
    };
    let b = ProtocolBounds { canonical: a.canonical, fault, ..ProtocolBounds::new(a.time_bound, a.values) };
    let report = explore_protocol(&b).map_err(bounds)?;
    let text = report.to_string();
    save(c.report.as_deref(), &text)?;
    emit(out, &text)?;
    Ok(if report.passed() { 0 } else { 1 })
}

fn check_system(file: &Path, a: &SysArgs, c: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let program = load(file)?;
    let fault = match c.inject_fault {
        None => None,
        Some(Fault::L3) => Some(LlFault::L3IgnoresTime),
        Some(_) => return Err(Failure(EX_USAGE, "t2/t5/t7 are protocol faults; use check-protocol".into())),
    };
    if a.depth == 0 {
        let _ = writeln!(err, "rcsp: warning: depth 0 explores nothing; passing vacuously");
    }
    let mode = match a.mode {
        CliMode::Free => Mode::Free,
        CliMode::Policy => Mode::Policy,
    };
    let b = SystemBounds { mode, fault, ..SystemBounds::new(a.depth, a.k) };
    let report = explore_system(&ConfigLL::initial(&program), &b).map_err(bounds)?;
    let text = report.to_string();
    save(c.report.as_deref(), &text)?;
    emit(out, &text)?;
    Ok(if report.passed() { 0 } else { 1 })
}

fn bounds(e: ExploreError) -> Failure {
    Failure(EX_USAGE, e.to_string())
}
