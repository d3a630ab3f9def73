mod commands;
mod error;
mod output;
mod registry;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "chaincalc", version, about = "Differential chains, forms and their pairings")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run the invariant checks of the command's module instead.
    #[arg(long, global = true)]
    selftest: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chains for classical domains.
    Domain(DomainArgs),
    /// Bracket on the order-r norm of a chain.
    NormEstimate(NormArgs),
    /// Compare `<ω, ∂A>` with `<dω, A>`.
    StokesCheck(StokesArgs),
    /// Contour integral of a named holomorphic function, or its Cauchy value at `--z`.
    Cauchy(CauchyArgs),
    /// Winding index of a 1-chain about a point.
    Winding(WindingArgs),
    /// Residue sum over declared poles.
    Residue(ResidueArgs),
    /// Signed density of a planar polyhedral chain at a point.
    Density(DensityArgs),
    /// Orbit pairings at checkpoints of a torus flow, as CSV.
    AsymptoticCycle(CycleArgs),
    /// The chain of a measure transported by a vector field.
    MeasureChain(MeasureArgs),
    /// Invariant checks of every module.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Cube,
    WhitneyDisk,
    Simplex,
    Circle,
    Koch,
}

#[derive(Args, Debug, Serialize)]
pub struct DomainArgs {
    #[arg(long, value_enum)]
    pub kind: Option<DomainKind>,
    #[arg(long, default_value_t = 4)]
    pub level: u32,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Side of the cube or radius of the disk and circle.
    #[arg(long, default_value_t = 1.0)]
    pub size: f64,
    /// Circle segments; `4 · 2^level` when absent.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Write the polyhedral form (simplex, koch) instead of the pointed chain.
    #[arg(long)]
    pub polyhedral: bool,
    #[arg(long, default_value_t = 1 << 22)]
    pub budget: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct NormArgs {
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Box `lo1,..,lon:hi1,..,hin` on which probe bounds hold.
    #[arg(long)]
    pub region: Option<String>,
    /// Frequency levels of the probe library.
    #[arg(long, default_value_t = 4)]
    pub levels: u32,
}

#[derive(Args, Debug, Serialize)]
pub struct StokesArgs {
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value = "poly")]
    pub form: String,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct CauchyArgs {
    #[arg(long, default_value = "exp")]
    pub f: String,
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long)]
    pub z: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct WindingArgs {
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// `x,y` or `centroid`.
    #[arg(long, default_value = "centroid")]
    pub z: String,
    /// Fail unless the index is within tolerance of this value.
    #[arg(long)]
    pub expect: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ResidueArgs {
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// JSON list of `{"at": [x, y], "radius": r, "coefficient": [re, im]}`.
    #[arg(long)]
    pub poles: Option<PathBuf>,
    /// Holomorphic part added to the pole terms.
    #[arg(long, default_value = "zero")]
    pub f: String,
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    /// Polyhedral 2-chain, or a closed 1-chain coned from `--apex`.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long)]
    pub z: Option<String>,
    #[arg(long)]
    pub apex: Option<String>,
    #[arg(long, default_value = "1e-2,1e-3,1e-4")]
    pub radii: String,
    /// Monte Carlo samples per radius; exact areas when absent.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct CycleArgs {
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long = "T", default_value_t = 100.0)]
    pub horizon: f64,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub checkpoints: usize,
    /// JSON list of form names; the trigonometric bank of `--degree` when absent.
    #[arg(long)]
    pub forms: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Lebesgue grid resolution for the space average.
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct MeasureArgs {
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Unit-weight atoms `x,y;x,y;…` instead of the grid.
    #[arg(long)]
    pub dirac: Option<String>,
    /// Where to write the chain itself.
    #[arg(long)]
    pub chain_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SelftestArgs {
    /// Restrict to one module.
    #[arg(long)]
    pub module: Option<String>,
}

/// `run <subcommand> …` is accepted as an alias of `<subcommand> …`.
fn normalized_args() -> Vec<std::ffi::OsString> {
    let mut args: Vec<_> = std::env::args_os().collect();
    if args.get(1).is_some_and(|a| a == "run") {
        args.remove(1);
    }
    args
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CHAINCALC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|e| CliError::parse("CHAINCALC_THREADS", e))?;
        if n == 0 {
            return Err(CliError::Invalid("CHAINCALC_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(normalized_args());
    let result = configure_threads().and_then(|_| commands::dispatch(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({"error": {"code": e.code(), "message": e.to_string()}});
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
