//! `gfbm`: kernels, simulation and path-property checks for generalized
//! fractional Brownian motion from the command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a
//! verification check failed, 64 usage error.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gfbm_core::{GfbmError, ModelParams, Variant};

const EXIT_DOMAIN: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECKS_FAILED: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "gfbm", version, about = "Generalized fractional Brownian motion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalization constant kappa and c = kappa^{-1/2}.
    Kappa {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = Route::Auto)]
        route: Route,
    },
    /// Regime of a parameter pair; invalid pairs are reported, not rejected.
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        /// Also print the FBM, BM and H = 1/2 labels.
        #[arg(long)]
        labels: bool,
    },
    /// Covariance matrix psi(s, t) over a grid, as CSV.
    Cov {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<String>,
    },
    /// Increment second moments phi(s, t) over a grid, as CSV.
    Phi {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<String>,
    },
    /// Sample paths on a uniform grid.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "exact")]
        method: gfbm_core::Method,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long)]
        grid_n: usize,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        /// Without a seed one is drawn from the clock and recorded in the manifest.
        #[arg(long)]
        seed: Option<u64>,
        /// Cell width of the Riemann discretization; defaults to t_max / 2048.
        #[arg(long)]
        mesh: Option<f64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Hurst index estimated from a path CSV.
    Estimate {
        #[arg(long)]
        input: String,
    },
    /// Runs the verification suite and writes a JSON report.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated check names; defaults to every applicable check.
        #[arg(long)]
        checks: Option<String>,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Constant of the composition law of the iterated logarithm.
    Sigma {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
    },
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    variant: VariantArg,
}

impl ParamArgs {
    fn params(&self) -> gfbm_core::Result<ModelParams> {
        let variant = match self.variant {
            VariantArg::Full => Variant::FullRange,
            VariantArg::Rl => Variant::RiemannLiouville,
        };
        ModelParams::new(self.alpha, self.gamma, variant)
    }
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct GridArgs {
    /// File of times separated by whitespace or commas.
    #[arg(long)]
    grid: Option<String>,
    /// `N,T`: N equal steps on [0, T].
    #[arg(long)]
    uniform: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Full,
    Rl,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Route {
    Auto,
    Closed,
    #[value(alias = "quadrature")]
    Quad,
}

/// Everything that ends a run early.
#[derive(Debug)]
enum CliError {
    Core(GfbmError),
    Io { path: String, source: std::io::Error },
    Usage(String),
    ChecksFailed(Vec<String>),
}

impl From<GfbmError> for CliError {
    fn from(e: GfbmError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_domain_error() => EXIT_DOMAIN,
            CliError::Core(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_DOMAIN,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::ChecksFailed(_) => EXIT_CHECKS_FAILED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::ChecksFailed(names) => write!(f, "failed checks: {}", names.join(", ")),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GFBM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GFBM_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| commands::run(cli.command, &argv[1..]));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gfbm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
