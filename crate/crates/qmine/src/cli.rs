//! The `qmine` command line: count, mine, attack, verify.
//!
//! Exit codes: 0 success, 1 assertion or verification failure, 2 usage or
//! input error, 3 I/O error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::harness::{self, ReportFormat, RunOptions, SuiteCaps};
use crate::mining::{self, MiningResult, SupportOracle};
use crate::oracles::{Database, Predicate};
use crate::protocol::{estimate_predicate, write_transcript, ProtocolParams, StrategyKind, TranscriptHeader};
use crate::rng::{stream, TAG_DB};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "QMINE_SEED";

#[derive(Debug, Parser)]
#[command(name = "qmine", version, about = "Privacy-preserving quantum counting and mining, simulated")]
pub struct Cli {
    /// Master seed; sampled and printed when omitted.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Trivial,
    OneConfusing,
    TwoConfusing,
    HbarTrap,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Trivial => StrategyKind::Trivial,
            StrategyArg::OneConfusing => StrategyKind::OneConfusing,
            StrategyArg::TwoConfusing => StrategyKind::TwoConfusing,
            StrategyArg::HbarTrap => StrategyKind::HbarTrap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MineMode {
    Rules,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Exact,
    Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mutation {
    GSign,
}

#[derive(Debug, clap::Args)]
pub struct ProtocolArgs {
    /// Control qubits before any strategy adjustment (T = 2^t loops).
    #[arg(long, default_value_t = 7)]
    pub t: u32,
    /// Test probability per window.
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long = "s-min", default_value_t = 0.2)]
    pub s_min: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Trivial)]
    pub strategy: StrategyArg,
    /// Expected address width; checked against the database.
    #[arg(long)]
    pub n: Option<u32>,
    /// Expected transaction width; checked against the database.
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the support of one itemset with a protocol run.
    Count {
        #[arg(long)]
        db: PathBuf,
        /// k-character 0/1 string; all zeros is the empty itemset.
        #[arg(long)]
        itemset: String,
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Also print the exact support.
        #[arg(long)]
        oracle: bool,
        /// Write the run transcript as JSON lines.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Association rules or a decision tree over a support oracle.
    Mine {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, value_enum, default_value_t = MineMode::Rules)]
        mode: MineMode,
        #[arg(long = "support-oracle", value_enum, default_value_t = OracleArg::Exact)]
        support_oracle: OracleArg,
        #[command(flatten)]
        proto: ProtocolArgs,
        #[arg(long = "c-min", default_value_t = 0.6)]
        c_min: f64,
        #[arg(long = "h-min", default_value_t = 0.2)]
        h_min: f64,
        /// Flip each bit with probability ρ before mining.
        #[arg(long)]
        randomize: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run experiment specs from a file or a bundled set.
    Attack {
        /// JSON file with one spec or a list of specs.
        #[arg(long, conflicts_with = "bundled", required_unless_present = "bundled")]
        spec: Option<PathBuf>,
        /// One of: honest, attack2-data, recovery, battery.
        #[arg(long)]
        bundled: Option<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop starting new trials after this many seconds per experiment.
        #[arg(long = "budget-secs")]
        budget_secs: Option<u64>,
    },
    /// Run the invariant suite.
    Verify {
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 3)]
        t: u32,
        /// Self-test: break an operator and expect failures.
        #[arg(long, value_enum)]
        mutate: Option<Mutation>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Verification(_) | Error::Internal(_) => EXIT_FAILED,
        _ => EXIT_USAGE,
    }
}

fn seed_or_sample(seed: Option<u64>, err: &mut dyn Write) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        let _ = writeln!(err, "seed: {s}");
        s
    })
}

fn sink(path: Option<&Path>, out: &mut dyn Write, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn load_db(path: &Path, proto: &ProtocolArgs) -> Result<Database> {
    let db = Database::load(path)?;
    for (flag, want, got) in [("--n", proto.n, db.n()), ("--k", proto.k, db.k())] {
        if want.is_some_and(|w| w != got) {
            return Err(Error::InvalidParams(format!("{flag} {} but {} has {got}", want.unwrap_or(0), path.display())));
        }
    }
    Ok(db)
}

/// Protocol parameters for `db`; strategies that hide control qubits get
/// that many extra so T_eff stays 2^t.
fn protocol_params(db: &Database, proto: &ProtocolArgs, seed: u64, err: &mut dyn Write) -> Result<(ProtocolParams, StrategyKind)> {
    let kind = StrategyKind::from(proto.strategy);
    let t = proto.t + kind.hidden_qubits();
    let mut params = ProtocolParams::new(db.n(), db.k(), t, seed).with_p(proto.p);
    params.s_min = proto.s_min;
    params.validate()?;
    let t_eff = 1usize << proto.t;
    if kind.hidden_qubits() > 0 {
        let _ = writeln!(err, "{kind:?}: using t = {t} control qubits, T_eff = {t_eff}");
    }
    if proto.s_min > 0.0 && (t_eff as f64) <= 100.0 / proto.s_min.sqrt() {
        let _ = writeln!(
            err,
            "warning: T_eff = {t_eff} <= 100/sqrt(s_min) = {:.1}; relative error may exceed 0.07",
            100.0 / proto.s_min.sqrt()
        );
    }
    Ok((params, kind))
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Count { db, itemset, proto, oracle, transcript, out: path } => {
            let seed = seed_or_sample(cli.seed, err);
            let database = load_db(&db, &proto)?;
            let items: BitString = itemset.parse()?;
            if items.width() != database.k() {
                return Err(Error::InvalidParams(format!("itemset has {} bits, database k = {}", items.width(), database.k())));
            }
            let (params, kind) = protocol_params(&database, &proto, seed, err)?;
            let f = Predicate::contains(items);
            let est = estimate_predicate(&database, &f, &params, kind)?;
            let o = &est.outcome;
            if let Some(tp) = &transcript {
                let header = TranscriptHeader {
                    seed,
                    params: params.clone(),
                    y: o.y,
                    theta: o.theta,
                    s1: o.s1,
                    s2: o.s2,
                    terminated: o.terminated.clone(),
                };
                let f = File::create(tp).map_err(|e| Error::io(tp, e))?;
                let mut w = BufWriter::new(f);
                write_transcript(&mut w, &header, &o.transcript).map_err(|e| relabel(e, tp))?;
                w.flush().map_err(|e| Error::io(tp, e))?;
            }
            let mut v = json!({
                "seed": seed,
                "n": params.n,
                "k": params.k,
                "t": params.t,
                "t_eff": o.t_eff,
                "strategy": kind,
                "itemset": items.to_string(),
                "s1": est.s1,
                "s2": est.s2,
                "s_combined": est.s_combined,
                "theta": o.theta,
                "g1": o.g1,
                "g2": o.g2,
                "tests": o.tests,
            });
            if oracle {
                v["exact"] = json!(database.mean_of(&f));
            }
            sink(path.as_deref(), out, &(serde_json::to_string_pretty(&v)? + "\n"))?;
            Ok(EXIT_OK)
        }
        Command::Mine { db, mode, support_oracle, proto, c_min, h_min, randomize, out: path } => {
            let seed = seed_or_sample(cli.seed, err);
            let mut database = load_db(&db, &proto)?;
            if mode == MineMode::Tree && database.labels().is_none() {
                return Err(Error::InvalidParams(format!("{}: tree mode needs a label column", db.display())));
            }
            if let Some(rho) = randomize {
                database = mining::randomize_db(&database, rho, &mut stream(seed, &[TAG_DB]))?;
            }
            let oracle = match support_oracle {
                OracleArg::Exact => SupportOracle::exact(database.clone()),
                OracleArg::Protocol => {
                    let (params, kind) = protocol_params(&database, &proto, seed, err)?;
                    SupportOracle::protocol(database.clone(), params, kind)
                }
            };
            let result = match mode {
                MineMode::Rules => {
                    let frequent = mining::frequent_itemsets(&oracle, proto.s_min)?;
                    let rules = mining::association_rules(&frequent, &oracle, c_min)?;
                    MiningResult::Rules { s_min: proto.s_min, c_min, frequent, rules, queries: oracle.queries() }
                }
                MineMode::Tree => {
                    let labeled = oracle.labeled()?;
                    let tree = mining::decision_tree(&labeled, h_min)?;
                    MiningResult::Tree { h_min, tree, queries: labeled.queries() }
                }
            };
            sink(path.as_deref(), out, &(serde_json::to_string_pretty(&result)? + "\n"))?;
            Ok(EXIT_OK)
        }
        Command::Attack { spec, bundled, format, out: path, budget_secs } => {
            let mut specs = match (&spec, &bundled) {
                (Some(p), _) => harness::load_specs(p)?,
                (None, Some(name)) => harness::bundled(name).ok_or_else(|| {
                    Error::InvalidParams(format!("unknown bundled spec {name:?}; try one of {:?}", harness::BUNDLED))
                })?,
                (None, None) => return Err(Error::InvalidParams("give --spec or --bundled".into())),
            };
            if let Some(s) = cli.seed {
                specs.iter_mut().for_each(|sp| sp.params.seed = s);
            }
            let opts = RunOptions { budget: budget_secs.map(Duration::from_secs) };
            let report = harness::run_battery(&specs, &opts)?;
            for e in &report.experiments {
                for a in &e.assertions {
                    let _ = writeln!(
                        err,
                        "{} {}: {} = {:.4} [{:.4}, {:.4}] vs {:?} {}",
                        if a.pass { "PASS" } else { "FAIL" },
                        e.name,
                        a.metric,
                        a.estimate,
                        a.ci_lo,
                        a.ci_hi,
                        a.comparator,
                        a.bound
                    );
                }
            }
            let fmt = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            match &path {
                Some(p) => harness::emit_report(&report, p, fmt)?,
                None => harness::write_report(&report, out, fmt)?,
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Verify { n, k, t, mutate, out: path } => {
            if n == 0 || k == 0 || t == 0 || n > 3 || k > 3 || t > 5 {
                return Err(Error::InvalidParams("verify caps must satisfy 1 <= n, k <= 3 and 1 <= t <= 5".into()));
            }
            let report = harness::invariant_suite(SuiteCaps { n, k, t }, mutate == Some(Mutation::GSign))?;
            for c in &report.checks {
                let _ = writeln!(out, "{} {} [{}] {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.params, c.detail);
            }
            if let Some(p) = &path {
                std::fs::write(p, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(p, e))?;
            }
            match report.first_failure() {
                None => Ok(EXIT_OK),
                Some(c) => {
                    let _ = writeln!(err, "verification failed: {} [{}]: {}", c.name, c.params, c.detail);
                    Ok(EXIT_FAILED)
                }
            }
        }
    }
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

/// Entry point for the binary.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}
