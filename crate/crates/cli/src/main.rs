//! `alto`: convert, inspect, benchmark and decompose sparse tensors.

mod commands;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use alto_core::cpd::DEFAULT_FAST_MEMORY_BYTES;
use alto_core::kernels::{Strategy, DEFAULT_TEMP_BUDGET_BYTES};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "alto", version, about = "Linearized sparse tensor toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert between FROSTT text and the binary linearized format.
    Convert(ConvertArgs),
    /// Print shape statistics, storage sizes and optionally the segmentation.
    Stats(StatsArgs),
    /// Time kernels.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Least-squares CP decomposition.
    CpAls(CpAlsArgs),
    /// Poisson CP decomposition with multiplicative updates.
    CpApr(CpAprArgs),
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Time MTTKRP for one mode or all modes.
    Mttkrp(BenchArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// FROSTT `.tns` text or binary linearized tensor (detected by content).
    input: PathBuf,
    /// Mode lengths, e.g. `4,8,2` or `4x8x2`; inferred from text input when omitted.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
}

#[derive(Clone, Debug)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let dims = s
        .split([',', 'x', 'X'])
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad mode length {t:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err("mode lengths must be positive".into());
    }
    Ok(Dims(dims))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tns,
    Alto,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output path.
    output: PathBuf,
    /// Output format; defaults to `tns` for a `.tns` output path and `alto` otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Word size used for the coordinate-format comparison.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    word_bits: u32,
    /// Also report the segmentation into this many line segments.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    partitions: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Auto,
    Recursive,
    Output,
    Seq,
}

impl StrategyArg {
    fn resolve(self) -> Option<Strategy> {
        match self {
            Self::Auto => None,
            Self::Recursive => Some(Strategy::RecursiveBuffered),
            Self::Output => Some(Strategy::OutputOriented),
            Self::Seq => Some(Strategy::Sequential),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ExecArgs {
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long, env = "ALTO_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Line segments; defaults to the thread count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    partitions: Option<u64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
    /// Largest total size of per-segment scratch buffers.
    #[arg(long, default_value_t = DEFAULT_TEMP_BUDGET_BYTES)]
    temp_budget_bytes: u64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    rank: u64,
    /// `all` or a zero-based mode index.
    #[arg(long, default_value = "all")]
    mode: String,
    /// Timed repetitions per mode.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    iters: u64,
    /// Seed for the random factor matrices.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args, Debug)]
struct CpAlsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    rank: u64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Stop once the fit improves by less than this.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    exec: ExecArgs,
    /// Write the model as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MemArg {
    Auto,
    Pre,
    Otf,
}

#[derive(Args, Debug)]
struct CpAprArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    rank: u64,
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    max_inner: u64,
    #[arg(long, default_value_t = 1e-4)]
    tau: f64,
    #[arg(long, default_value_t = 1e-2)]
    kappa: f64,
    #[arg(long, default_value_t = 1e-10)]
    kappa_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = MemArg::Auto)]
    mem: MemArg,
    /// Factor footprint above which limited-reuse tensors precompute Khatri-Rao rows.
    #[arg(long, default_value_t = DEFAULT_FAST_MEMORY_BYTES)]
    fast_memory_bytes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    exec: ExecArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, error: anyhow::anyhow!("{msg}") }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<alto_core::Error>() {
            Some(alto_core::Error::Numerical(_)) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Self { code, error }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Convert(a) => commands::convert(a),
        Command::Stats(a) => commands::stats(a),
        Command::Bench(BenchCommand::Mttkrp(a)) => commands::bench_mttkrp(a),
        Command::CpAls(a) => commands::cp_als(a),
        Command::CpApr(a) => commands::cp_apr(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report::print_error(&f);
            ExitCode::from(f.code)
        }
    }
}
