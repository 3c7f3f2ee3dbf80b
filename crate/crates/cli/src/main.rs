//! `rittkit`: experiment runner and invariant-suite driver.
//!
//! Exit codes: 0 success, 1 a check or computation failed, 2 usage error.

// `!(x < y)` is the NaN-rejecting form used for input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod checks;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rittkit::decomp::Splitter;
use rittkit::sqfun::SqKind;
use rittkit::Exponent;

#[derive(Parser, Debug)]
#[command(name = "rittkit", version, about = "Square functions and decompositions for Ritt operators on Schatten classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// Left multiplication by diag(1 - 2^{-k}).
    La,
    /// Right multiplication by diag(1 - 2^{-k}).
    Ra,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Input {
    /// Gaussian matrix drawn from the seed.
    Random,
    /// Every entry 1/sqrt(n).
    RankOne,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovKind {
    /// Schur multiplier with symbol c^{|i-j|}.
    Toeplitz,
    /// x -> (u x u^* + u^* x u) / 2 for a random unitary u.
    Unitary,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Column/row ratio growth for the diagonal example.
    Growth(GrowthArgs),
    /// Column/row decomposition of a random matrix.
    Decompose(DecomposeArgs),
    /// Run an invariant suite: identities, norms, ritt, growth, decomp, markov.
    Check(CheckArgs),
    /// Evaluate one square function.
    Sqfun(SqfunArgs),
    /// Build a Markov map, validate it, and decompose on the complement of
    /// its fixed space.
    Markov(MarkovArgs),
}

fn parse_p(s: &str) -> Result<Exponent, String> {
    s.parse::<Exponent>().map_err(|e| e.to_string())
}

fn parse_splitter(s: &str) -> Result<Splitter, String> {
    s.parse::<Splitter>().map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<SqKind, String> {
    s.parse::<SqKind>().map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
pub struct GrowthArgs {
    /// Schatten exponent, e.g. 4, 4/3, inf; p = 2 is rejected.
    #[arg(long, value_parser = parse_p)]
    pub p: Exponent,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    pub n_list: Vec<usize>,
    /// Also write the JSON summary here when `--format csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long, value_parser = parse_p, default_value = "4/3")]
    pub p: Exponent,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "la")]
    pub operator: Operator,
    /// all-column, all-row, rad-optimal or thresholded.
    #[arg(long, value_parser = parse_splitter, default_value = "rad-optimal")]
    pub splitter: Splitter,
    /// Relative tolerance for the reconstruction tail.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub k_max: usize,
    /// Fixed number of reconstruction terms.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SqfunArgs {
    #[arg(long, value_parser = parse_p)]
    pub p: Exponent,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// col, row, rad or split.
    #[arg(long, value_parser = parse_kind, default_value = "col")]
    pub kind: SqKind,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "la")]
    pub operator: Operator,
    #[arg(long, value_enum, default_value = "random")]
    pub input: Input,
    /// Damping factor: the sequence is built from rho T.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub k_max: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MarkovArgs {
    #[arg(long, value_enum, default_value = "toeplitz")]
    pub kind: MarkovKind,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Toeplitz ratio c in (-1, 1).
    #[arg(long, default_value_t = 0.9)]
    pub c: f64,
    #[arg(long, value_parser = parse_p, default_value = "4/3")]
    pub p: Exponent,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_splitter, default_value = "rad-optimal")]
    pub splitter: Splitter,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub k_max: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Failed(String),
}

impl From<rittkit::Error> for Failure {
    fn from(e: rittkit::Error) -> Self {
        use rittkit::Error::*;
        match e {
            InvalidExponent(_) | InvalidArgument(_) | EigenvalueOne | Markov(_) => Failure::Usage(e.to_string()),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Failed(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("RITTKIT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Usage(format!("RITTKIT_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Failed(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Growth(a) => commands::growth(&a),
        Command::Decompose(a) => commands::decompose(&a),
        Command::Check(a) => commands::check(&a),
        Command::Sqfun(a) => commands::sqfun(&a),
        Command::Markov(a) => commands::markov(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
