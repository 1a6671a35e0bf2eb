//! `statemock`: generate traces, mine models, serve them, and evaluate them.

mod server;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use statemock_core::eval::{run_evaluation, Approach, EvalConfig};
use statemock_core::synth::{
    example_trace, gen_bank_trace, gen_directory_trace, gen_stateless_trace, BankConfig,
    DirectoryConfig, StatelessConfig, StatelessKind,
};
use statemock_core::{mine, InteractionTrace, MiningConfig, Syntax};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "statemock",
    version,
    about = "Mine stateful service models from traces and serve them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trace from one of the reference services.
    Gen(GenArgs),
    /// Mine a model bundle from a trace.
    Mine(MineArgs),
    /// Serve a model bundle over TCP (newline-delimited) or HTTP.
    Serve(server::ServeArgs),
    /// Cross-validate the emulator and the baseline on a trace.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Directory service (bind, add, delete, search, modify, unbind).
    Ldap,
    Bank,
    Stateless,
    /// The sixteen-interaction example scenario.
    Example,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 1000)]
    interactions: usize,
    /// Records (directory) or accounts (bank).
    #[arg(long, default_value_t = 50)]
    records: usize,
    /// Chance each record exists before recording; above zero means a non-clean start.
    #[arg(long, default_value_t = 0.0)]
    preexist_ratio: f64,
    /// Chance the directory client knows whether a pre-existing record is there.
    #[arg(long, default_value_t = 0.0)]
    awareness: f64,
    /// Touches per record guided by the client's belief (default: all).
    #[arg(long)]
    informed_ops: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    withdraw_fail_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Regular expression with one capture group selecting the key payload.
    #[arg(long)]
    key_pattern: Option<String>,
    /// Treat the trace as stateless (no key payload).
    #[arg(long, conflicts_with = "key_pattern")]
    stateless: bool,
    /// Request field holding the request type (detected when omitted).
    #[arg(long)]
    type_field: Option<String>,
    #[arg(long, default_value_t = ',')]
    field_sep: char,
    #[arg(long, default_value_t = ':')]
    kv_sep: char,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    trace: TraceArgs,
    /// kTail depth.
    #[arg(long, default_value_t = 0)]
    k: i32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value = "det,prob,rand,wc")]
    modes: String,
    /// Fields that must match for a data-consistent response (default: id and the key field).
    #[arg(long, value_delimiter = ',')]
    critical_fields: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A usage problem found after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl TraceArgs {
    fn mining_config(&self) -> Result<MiningConfig> {
        if self.key_pattern.is_none() && !self.stateless {
            return Err(usage(
                "a stateful trace needs --key-pattern (or pass --stateless)",
            ));
        }
        Ok(MiningConfig {
            key_pattern: self.key_pattern.clone(),
            type_field: self.type_field.clone(),
            syntax: Syntax {
                field_sep: self.field_sep,
                kv_sep: self.kv_sep,
            },
            ..MiningConfig::default()
        })
    }

    fn load(&self, config: &MiningConfig) -> Result<InteractionTrace> {
        let text = fs::read_to_string(&self.trace)
            .with_context(|| format!("reading {}", self.trace.display()))?;
        Ok(InteractionTrace::parse(&text, &config.trace_options()?)?)
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.preexist_ratio) || !(0.0..=1.0).contains(&args.awareness) {
        return Err(usage("ratios must lie in [0, 1]"));
    }
    let clean_start = args.preexist_ratio <= 0.0;
    let text = match args.kind {
        Kind::Example => example_trace(),
        Kind::Ldap => gen_directory_trace(&DirectoryConfig {
            interactions: args.interactions,
            records: args.records,
            clean_start,
            preexist_ratio: args.preexist_ratio,
            seed: args.seed,
            awareness: args.awareness,
            informed_ops: args.informed_ops,
            ..DirectoryConfig::default()
        }),
        Kind::Bank => gen_bank_trace(&BankConfig {
            interactions: args.interactions,
            accounts: args.records,
            clean_start,
            preexist_ratio: args.preexist_ratio,
            seed: args.seed,
            withdraw_fail_rate: args.withdraw_fail_rate,
        }),
        Kind::Stateless => gen_stateless_trace(&StatelessConfig {
            kind: StatelessKind::SearchApi,
            interactions: args.interactions,
            seed: args.seed,
        }),
    };
    write_output(args.out.as_deref(), &text)
}

fn mine_cmd(args: MineArgs) -> Result<()> {
    let mut config = args.trace.mining_config()?;
    config.ktail_k = args.k;
    let trace = args.trace.load(&config)?;
    let bundle = mine(&trace, &config)?;
    bundle.write_dir(&args.out)?;
    print!("{}", bundle.summary());
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let mining = args.trace.mining_config()?;
    let approaches = Approach::parse_list(&args.modes).map_err(|e| usage(e.to_string()))?;
    let trace = args.trace.load(&mining)?;
    let config = EvalConfig {
        folds: args.folds,
        seed: args.seed,
        approaches,
        critical_fields: args.critical_fields,
        mining,
        ..EvalConfig::default()
    };
    let report = run_evaluation(&trace, &config)?;
    report.write_dir(&args.out)?;
    print!("{}", report.summary());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<statemock_core::Error>() {
        Some(statemock_core::Error::Invariant(_)) => EXIT_INVARIANT,
        Some(e) if !e.is_data_error() => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Mine(a) => mine_cmd(a),
        Command::Serve(a) => server::serve(a),
        Command::Eval(a) => eval_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
