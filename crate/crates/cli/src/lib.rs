//! Library side of the `charfn` binary: argument types, presets, commands
//! and the report format.

pub mod commands;
pub mod presets;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Malformed input: exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser, Debug, Serialize)]
#[command(name = "charfn", version, about = "Characteristic functions of pure 1/k-contractions: certificates and verification runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Scalar backend for sign decisions and identity checks.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Replaces both float thresholds (composite 1e-8, single-step 1e-10).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Cap on the degree of infinite operator series.
    #[arg(long = "degree-cap", global = true, default_value_t = 64)]
    pub degree_cap: usize,
    /// Seed for sample points, random vectors and unitaries.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Kernel coefficient certificates.
    Kernel {
        #[command(subcommand)]
        cmd: KernelCmd,
    },
    /// Build or verify the characteristic function of a tuple.
    Charfn {
        #[command(subcommand)]
        cmd: CharfnCmd,
    },
    /// Sweep the quadratic-form obstruction for `k_m` and `l = k_n`.
    Impossibility {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long = "N-max", default_value_t = 20)]
        n_max: usize,
    },
    /// Run the full verification matrix.
    Suite {
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Subcommand, Debug, Serialize)]
pub enum KernelCmd {
    /// Coefficients, b-series and the admissibility certificate.
    Info(KernelArgs),
    /// Complete Nevanlinna-Pick test `b_n ≥ 0`.
    Cnp(KernelArgs),
    /// Sign certificate for the coefficients of `num/den`.
    Quotient {
        #[arg(long)]
        num: PathBuf,
        #[arg(long)]
        den: PathBuf,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// `k = s·g` with `s` CNP and `g` positive.
    Factor {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        cnp: PathBuf,
        #[arg(long = "N")]
        n: Option<usize>,
    },
}

#[derive(Args, Debug, Serialize)]
pub struct KernelArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Truncation order.
    #[arg(long = "N")]
    pub n: Option<usize>,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum CharfnCmd {
    /// Construct θ and report its coefficients.
    Build(CharfnArgs),
    /// Construct θ and run every identity check.
    Verify(CharfnArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CharfnArgs {
    /// Named configuration (see `presets`).
    #[arg(long, conflicts_with_all = ["spec", "cnp", "tuple", "model_degree"])]
    pub preset: Option<String>,
    /// Kernel `k`.
    #[arg(long, requires = "cnp")]
    pub spec: Option<PathBuf>,
    /// CNP factor `s` of `k`.
    #[arg(long, requires = "spec")]
    pub cnp: Option<PathBuf>,
    /// Tuple file `{"mats": [[[[re, im], …], …], …]}`.
    #[arg(long, conflicts_with = "model_degree")]
    pub tuple: Option<PathBuf>,
    /// Use the model tuple `T_N` of `k`.
    #[arg(long = "model-degree")]
    pub model_degree: Option<usize>,
    /// Kernel truncation order.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Index window of the construction.
    #[arg(long)]
    pub window: Option<usize>,
    /// Number of `(z, w)` pairs for the pointwise identities.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Write every Taylor coefficient of θ to this file.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

pub use commands::run;
