//! Batch command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 I/O error,
//! 4 numerical failure.

mod bench;
mod eval;
mod generate;
mod manifest;
mod run;
mod unmix;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::UnmixError;

pub use manifest::RunManifest;
pub use run::Algo;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "misisun", version, about = "Semisupervised hyperspectral unmixing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset bundle.
    Generate(GenerateArgs),
    /// Estimate abundances (and endmembers) from a bundle.
    Unmix(UnmixArgs),
    /// Compare estimates against ground truth.
    Eval(EvalArgs),
    /// Run a seeded grid of experiments and write CSV tables.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    /// 105 x 105 scene of homogeneous squares.
    Sim1,
    /// 100 x 100 scene with purity-filtered Dirichlet abundances.
    Sim2,
    /// Library with ground-truth endmembers only.
    Library,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: Dataset,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target SNR in dB; `inf` disables noise.
    #[arg(long, default_value_t = 30.0)]
    pub snr: f64,
    /// Purity cap (sim2).
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, default_value_t = 224)]
    pub bands: usize,
    #[arg(long, default_value_t = 60)]
    pub atoms: usize,
    /// Endmember count (sim1 requires 6).
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    /// Scaled and perturbed variants per base atom.
    #[arg(long, default_value_t = 0)]
    pub variability: usize,
    /// Largest number of atoms mixed into one endmember (1 to 3).
    #[arg(long, default_value_t = 3)]
    pub atoms_per_endmember: usize,
    /// Gaussian smoothing width of the library spectra, in bands.
    #[arg(long, default_value_t = 6.0)]
    pub smoothness: f64,
    /// Take library and endmembers from an existing bundle instead.
    #[arg(long)]
    pub library: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// T = 10000, T1 = T2 = 5, mu = (50, 2, 1), lambda = 0.3.
    Simulated,
    /// Simulated values with T = 1000.
    Quick,
    /// T = 10000, T1 = T2 = 5, mu = (500, 50, 1), lambda = 10.
    Cuprite,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of endmembers (misisun, fasun).
    #[arg(long)]
    pub r: Option<usize>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Endmember matrix for fclsu (defaults to E_true.csv in the input).
    #[arg(long)]
    pub endmembers: Option<PathBuf>,
}

/// Solver settings shared by `unmix` and `bench`. Unset values come from the
/// preset.
#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, value_enum, default_value_t = Preset::Simulated)]
    pub preset: Preset,
    /// Center-penalty weight (misisun) or l1 weight (sunsal).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Outer iterations.
    #[arg(long = "T")]
    pub outer: Option<usize>,
    /// Inner iterations of the abundance step.
    #[arg(long)]
    pub t1: Option<usize>,
    /// Inner iterations of the mixing step.
    #[arg(long)]
    pub t2: Option<usize>,
    #[arg(long)]
    pub mu_a: Option<f64>,
    #[arg(long)]
    pub mu_b1: Option<f64>,
    #[arg(long)]
    pub mu_b2: Option<f64>,
    /// Renormalize abundance columns to sum exactly to one.
    #[arg(long)]
    pub asc_renormalize: bool,
    /// Iterations of fclsu and sunsal.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Augmented-Lagrangian weight of sunsal.
    #[arg(long, default_value_t = 0.1)]
    pub sunsal_mu: f64,
    /// Early-stop threshold on the relative objective change over 10 outer
    /// iterations; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    pub tol_obj: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory holding A_est.csv and optionally E_est.csv, B_est.csv.
    #[arg(long)]
    pub est: PathBuf,
    /// Dataset bundle with ground truth.
    #[arg(long)]
    pub truth: PathBuf,
    /// Match estimated endmembers to the reference ones before scoring.
    #[arg(long)]
    pub align: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Sim1,
    Sim2,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub algos: Vec<String>,
    /// SNR conditions in dB (sim1).
    #[arg(long, value_delimiter = ',')]
    pub snr_list: Vec<f64>,
    /// Purity conditions (sim2).
    #[arg(long, value_delimiter = ',')]
    pub rho_list: Vec<f64>,
    /// SNR of the sim2 scenes.
    #[arg(long, default_value_t = 30.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Per-run results; the aggregate goes next to it with an `_aggregate`
    /// suffix.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 224)]
    pub bands: usize,
    #[arg(long, default_value_t = 60)]
    pub atoms: usize,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Errors surfaced to the process exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Unmix(UnmixError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Unmix(e) => e.exit_code(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Unmix(e) => write!(f, "{e}"),
        }
    }
}

impl From<UnmixError> for CliError {
    fn from(e: UnmixError) -> Self {
        CliError::Unmix(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parse `args` (including the program name), run the command and return
/// the exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let command_line = args
        .iter()
        .map(|a| {
            let a = a.to_string_lossy();
            if a.is_empty() || a.contains(char::is_whitespace) {
                format!("{a:?}")
            } else {
                a.into_owned()
            }
        })
        .collect::<Vec<_>>()
        .join(" ");
    let outcome = match &cli.command {
        Command::Generate(a) => generate::run(a, &command_line),
        Command::Unmix(a) => unmix::run(a, &command_line),
        Command::Eval(a) => eval::run(a),
        Command::Bench(a) => bench::run(a, &command_line),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
