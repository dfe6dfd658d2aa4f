use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod adjust;
mod diagnose;
mod evaluate;
mod inputs;
mod output;

/// Exit status for a run that succeeded but flagged a fairness problem.
pub const EXIT_FLAGGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fairchain",
    version,
    about = "Remove protected-attribute information from tabular features by chained conditional transforms",
    after_help = "Examples:\n  \
      fairchain adjust --data compas.csv --spec spec.json --out run\n  \
      fairchain diagnose --data compas.csv --adjusted run --spec spec.json --out run\n  \
      fairchain evaluate --data compas.csv --adjusted run --spec spec.json --out run --trees 500\n\n\
      FAIRCHAIN_THREADS caps the worker threads. Exit codes: 0 ok, 1 internal error,\n\
      2 invalid input, 3 group-parity test rejected after adjustment."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the chain and write M adjusted replicates
    Adjust(AdjustArgs),
    /// KS fit tests, group parity before/after, and leakage audit
    Diagnose(DiagnoseArgs),
    /// Random forest AUC on raw versus adjusted features
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
pub struct AdjustArgs {
    /// Input CSV with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// JSON variable specification
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Number of replicates (overrides the spec file; default 10)
    #[arg(long)]
    pub m: Option<usize>,
    /// Seed (overrides the spec file; default 0)
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory holding adjusted_<k>.csv (and chain.json when available)
    #[arg(long)]
    pub adjusted: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Significance level for KS tests
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Cross-validation folds for the leakage audit
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Trees per forest in the leakage audit
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub adjusted: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trees per forest
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Cross-validation folds used to obtain out-of-sample scores
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// An input problem reported with exit status 2.
#[derive(Debug)]
pub struct UserError(pub String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

pub fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UserError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<fairchain::Error>() {
            return if e.is_user_error() { 2 } else { 1 };
        }
    }
    1
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("FAIRCHAIN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| user_error(format!("FAIRCHAIN_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Adjust(args) => adjust::run(&args),
        Command::Diagnose(args) => diagnose::run(&args),
        Command::Evaluate(args) => evaluate::run(&args),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err))
        }
    }
}
