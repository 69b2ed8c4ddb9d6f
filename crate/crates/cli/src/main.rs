//! `chifield`: tail approximations, Monte Carlo checks and genome scans for
//! chi-square random fields on lattices.

mod commands;
mod grid;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use report::Format;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Degenerate(String),
    Core(chifield::Error),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use chifield::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Degenerate(_) => 4,
            CliError::Core(e) => match e {
                E::NonFinite { .. } | E::Convergence(_) => 3,
                E::DegenerateTable { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Degenerate(msg) => write!(f, "degenerate data: {msg}"),
            CliError::Core(e) => e.fmt(f),
            CliError::Io(e) => e.fmt(f),
        }
    }
}

impl From<chifield::Error> for CliError {
    fn from(e: chifield::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser)]
#[command(name = "chifield", version, about = "Tail probabilities of chi-square random fields on lattices")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; inferred from a `.json` output path, else csv (json for `scan`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic tail approximations over a b grid.
    Tail(TailArgs),
    /// Empirical tail of the lattice maximum by exact simulation.
    Simulate(SimulateArgs),
    /// Pairwise chi-square scan of genotype data with adjusted p-values.
    Scan(ScanArgs),
    /// All analytic methods beside the simulated tail.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Renewal,
    Tube,
    Continuous,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMethodArg {
    Renewal,
    Tube,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NuArg {
    Series,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairsArg {
    Matched,
    All,
}

#[derive(Args, Serialize)]
pub struct TailArgs {
    /// Field configuration (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Threshold(s) on the chi scale: `4.5`, `4,5,6` or `a:b:step`.
    #[arg(long, visible_alias = "b-grid", allow_hyphen_values = true)]
    pub b: String,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "series")]
    pub nu: NuArg,
    /// Sphere quadrature samples.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, visible_alias = "b-grid", allow_hyphen_values = true)]
    pub b: String,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    /// Also write every replicate's maximum of Y² to this CSV file.
    #[arg(long)]
    pub dump_maxima: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, visible_alias = "b-grid", allow_hyphen_values = true)]
    pub b: String,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value = "series")]
    pub nu: NuArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Report unclamped analytic values.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Serialize)]
pub struct ScanArgs {
    /// Marker map CSV: marker_id,chromosome,position_cM.
    #[arg(long)]
    pub map: PathBuf,
    /// Genotype CSV: individual_id then one column per marker.
    #[arg(long)]
    pub genotypes: PathBuf,
    #[arg(long, value_parser = parse_design)]
    pub design: chifield::genome_scan::Design,
    #[arg(long, value_enum, default_value = "both")]
    pub method: ScanMethodArg,
    /// Permutations for the permutation p-value; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub permutations: usize,
    #[arg(long, value_enum, default_value = "matched")]
    pub pairs: PairsArg,
    #[arg(long, value_enum, default_value = "series")]
    pub nu: NuArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Number of peaks reported.
    #[arg(long, default_value_t = chifield::genome_scan::DEFAULT_TOP_K)]
    pub top: usize,
}

fn parse_design(s: &str) -> Result<chifield::genome_scan::Design, String> {
    s.parse().map_err(|e: chifield::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let inferred = cli
        .out
        .as_ref()
        .and_then(|p| p.extension())
        .filter(|ext| ext.eq_ignore_ascii_case("json"))
        .map(|_| Format::Json);
    let format = |default| cli.format.or(inferred).unwrap_or(default);
    let text = match &cli.command {
        Command::Tail(args) => commands::tail(args, cli.seed, format(Format::Csv))?,
        Command::Simulate(args) => commands::simulate(args, cli.seed, format(Format::Csv))?,
        Command::Compare(args) => commands::compare(args, cli.seed, format(Format::Csv))?,
        Command::Scan(args) => commands::scan(args, cli.seed, format(Format::Json))?,
    };
    report::emit(&text, cli.out.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chifield: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
