//! `foldfinder`: locate, certify and cross-check maximal fold bifurcations
//! of `g(x) - lambda h(x) = 0` described by TOML problem files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use foldfinder::Strategy;

mod commands;
mod output;

use output::{CliError, CliResult, Recorder};

#[derive(Parser, Debug)]
#[command(
    name = "foldfinder",
    version,
    about = "Maximal saddle-node bifurcations of g(x) - lambda h(x) = 0"
)]
struct Cli {
    /// Worker threads for multistarts and probes. Falls back to
    /// FOLDFINDER_THREADS, then to the number of logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also write a run manifest (stage outputs plus timings) to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximize lambda(x) = min g_i/h_i over the domain.
    Solve(SolveArgs),
    /// Check a candidate point against the fold checklist.
    Certify(CertifyArgs),
    /// Pseudo-arclength continuation of the solution branch.
    Trace(TraceArgs),
    /// Newton from many starts at a fixed lambda.
    Probe(ProbeArgs),
    /// Repeat `solve` over values of one problem-file key.
    Sweep(SweepArgs),
    /// solve, certify, trace and probe in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SolveOpts {
    /// epigraph-slp, smoothed-ascent, subgradient or grid-oracle.
    #[arg(long, default_value = "epigraph-slp")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid points per axis for grid-oracle.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Exit with a numerical failure when no start converges.
    #[arg(long)]
    pub require_convergence: bool,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub opts: SolveOpts,
    /// JSON output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-iteration trace of the best start as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PointArgs {
    /// Output of `solve` (or `pipeline`) to take x_star and lambda_star from.
    #[arg(long, conflicts_with_all = ["x", "lambda"])]
    pub from: Option<PathBuf>,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TraceOpts {
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value_t = 400)]
    pub max_points: usize,
    /// +1 follows increasing lambda first, -1 decreasing.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub direction: i8,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    pub problem: PathBuf,
    /// Start point; defaults to the problem's seed.
    #[command(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    pub opts: TraceOpts,
    /// Branch CSV path (stdout when absent, with the summary suppressed).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON path (stdout when absent and --out is given).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    pub problem: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub problem: PathBuf,
    /// Top-level key of the problem file, e.g. `n`, `q` or `L`.
    #[arg(long)]
    pub param: String,
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub values: Vec<String>,
    #[command(flatten)]
    pub opts: SolveOpts,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub solve: SolveOpts,
    #[command(flatten)]
    pub trace: TraceOpts,
    #[arg(long, default_value_t = 100)]
    pub probe_starts: usize,
    /// The probe runs at lambda_star + offset * (1 + |lambda_star|).
    #[arg(long, default_value_t = 1e-3)]
    pub probe_offset: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Branch CSV path.
    #[arg(long)]
    pub branch_csv: Option<PathBuf>,
}

fn configure_threads(flag: Option<usize>) -> CliResult<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("FOLDFINDER_THREADS") {
            Ok(s) => s.trim().parse().map_err(|_| {
                CliError::Usage(format!("FOLDFINDER_THREADS must be a count, got `{s}`"))
            })?,
            Err(_) => 0,
        },
    };
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(rayon::current_num_threads())
}

fn run(cli: Cli) -> CliResult<u8> {
    let threads = configure_threads(cli.threads)?;
    let mut rec = Recorder::new(threads);
    let (name, code) = match &cli.command {
        Command::Solve(a) => ("solve", commands::solve(a, &mut rec)?),
        Command::Certify(a) => ("certify", commands::certify(a, &mut rec)?),
        Command::Trace(a) => ("trace", commands::trace(a, &mut rec)?),
        Command::Probe(a) => ("probe", commands::probe(a, &mut rec)?),
        Command::Sweep(a) => ("sweep", commands::sweep(a, &mut rec)?),
        Command::Pipeline(a) => ("pipeline", commands::pipeline(a, &mut rec)?),
    };
    if let Some(path) = &cli.manifest {
        output::write_file(path, &output::to_json(&rec.into_manifest(name))?)?;
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
