//! The `andor` command line.
//!
//! Every subcommand reads `itable.v1` tables or CSV results written by an
//! earlier step and writes one artifact, to `--out` or to stdout. Each
//! artifact embeds the full run configuration (a `# config=<json>` line for
//! text formats, a `config` field for JSON), and identical inputs and flags
//! produce byte-identical output.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure or violated invariant.

mod commands;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use andor_core::metrics::DEFAULT_TAU_FACTOR;
use andor_core::sparsify::DEFAULT_ZETA_FACTOR;
use andor_core::synth::SignPolicy;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use verify::{run_checks, CheckOutcome};

#[derive(Debug, Parser)]
#[command(name = "andor", version, about = "AND-OR interaction extraction and learning-dynamics analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// AND and OR interactions of one masked-output table, plus its salient set.
    Extract(ExtractArgs),
    /// Sparsest AND-OR split of one masked-output table.
    Sparsify(SparsifyArgs),
    /// Closed-form optimal weights ŵ for ground truth w* at one noise level.
    Predict(PredictArgs),
    /// Adjacent-order row-norm ratios r^(k) over a σ² grid.
    Sweep(SweepArgs),
    /// The grid σ² whose theoretical distribution best matches a real one.
    Fit(FitArgs),
    /// Gradient-descent trajectory under a decreasing σ² schedule.
    Simulate(SimulateArgs),
    /// Monte-Carlo statistics of interaction noise under output noise.
    McNoise(McNoiseArgs),
    /// Per-order strength distribution of salient interactions.
    Distribution(DistributionArgs),
    /// Run the invariant suite on seeded random tables.
    Verify(VerifyArgs),
    /// Generate a synthetic ground truth and its converged outputs.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// v_and = v_or = v / 2.
    Even,
    /// Optimized sparsest split.
    Sparse,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// How to divide each output table into AND and OR parts.
    #[arg(long, value_enum, default_value_t = Split::Even)]
    pub split: Split,
    /// Bound on |δ| as a fraction of |v(x_N) - v(x_∅)| (sparse split).
    #[arg(long, default_value_t = DEFAULT_ZETA_FACTOR)]
    pub zeta_factor: f64,
    /// Iteration budget of the sparse split.
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Relative loss-improvement tolerance of the sparse split.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Smallest σ² of the log-spaced grid.
    #[arg(long, default_value_t = 1e-3)]
    pub sigma2_min: f64,
    /// Largest σ² of the log-spaced grid.
    #[arg(long, default_value_t = 1e2)]
    pub sigma2_max: f64,
    /// Number of log-spaced grid points.
    #[arg(long, default_value_t = 11)]
    pub grid_points: usize,
    /// Explicit comma-separated grid, used instead of the log-spaced one.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Masked-output table (`itable.v1`).
    pub input: PathBuf,
    /// Salience threshold as a fraction of |v(x_N) - v(x_∅)|.
    #[arg(long, default_value_t = DEFAULT_TAU_FACTOR)]
    pub tau_factor: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub split: SplitArgs,
    /// Decomposition file from `sparsify`; overrides --split.
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    /// Interaction CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Salient-set report as JSON (stderr when omitted).
    #[arg(long)]
    pub salient_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SparsifyArgs {
    /// Masked-output table (`itable.v1`).
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ZETA_FACTOR)]
    pub zeta_factor: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Primal/dual step balance of the optimizer.
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Decomposition CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the interactions of the optimized split.
    #[arg(long)]
    pub interactions_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Ground-truth weights w* (`itable.v1`, mask ∅ holds v(x_∅)).
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub sigma2: f64,
    /// ŵ as an `itable.v1` table (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Number of input variables.
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Ratio CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Distribution CSV written by `distribution`.
    #[arg(long)]
    pub real: PathBuf,
    /// Ground-truth weights w* (`itable.v1`).
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Fit result as JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Ground-truth weights w* (`itable.v1`).
    #[arg(long)]
    pub weights: PathBuf,
    /// Comma-separated segments `σ²:steps` or `σ²:steps:lr`, σ² non-increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub schedule: Vec<String>,
    /// Initial weights (`itable.v1`); a seeded N(0, 1) draw when omitted.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Seed of the random initialization.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Trajectory CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Final weights as an `itable.v1` table.
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct McNoiseArgs {
    /// Masked-output table (`itable.v1`).
    pub input: PathBuf,
    /// Standard deviation of the output noise.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Statistics CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DistributionArgs {
    /// Masked-output tables of the samples (`itable.v1`).
    #[arg(required_unless_present = "theo", conflicts_with = "theo")]
    pub inputs: Vec<PathBuf>,
    /// Weights table whose theoretical distribution is wanted instead.
    #[arg(long)]
    pub theo: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAU_FACTOR)]
    pub tau_factor: f64,
    /// Count only AND interactions.
    #[arg(long)]
    pub and_only: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub split: SplitArgs,
    /// Distribution CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Random,
    Positive,
}

impl From<Sign> for SignPolicy {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Random => SignPolicy::Random,
            Sign::Positive => SignPolicy::Positive,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    /// Non-zero effects per order (clamped to C(n, k)).
    #[arg(long, default_value_t = 3)]
    pub count: usize,
    /// Lowest order that receives effects.
    #[arg(long, default_value_t = 1)]
    pub min_order: usize,
    /// Highest order that receives effects (defaults to n).
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub min_magnitude: f64,
    #[arg(long, default_value_t = 2.0)]
    pub max_magnitude: f64,
    #[arg(long, value_enum, default_value_t = Sign::Random)]
    pub sign: Sign,
    /// v(x_∅), stored as w*_∅.
    #[arg(long, default_value_t = 0.0)]
    pub empty_value: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to the outputs.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Ground-truth weights table.
    #[arg(long)]
    pub weights_out: PathBuf,
    /// Converged (optionally noisy) outputs table.
    #[arg(long)]
    pub outputs_out: Option<PathBuf>,
}

/// Configuration recorded in every artifact.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a> {
    pub version: &'static str,
    #[serde(flatten)]
    pub command: &'a Command,
}

impl<'a> RunConfig<'a> {
    pub fn new(command: &'a Command) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

/// Why a run failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(andor_core::Error),
    /// Named checks of `verify` that did not hold.
    Checks(Vec<String>),
}

impl From<andor_core::Error> for Failure {
    fn from(e: andor_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        use andor_core::Error as E;
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e {
                E::Config(_) | E::Capacity(_) => 1,
                E::Numeric(_) | E::InvariantViolation(_) | E::Contract(_) => 3,
                _ => 2,
            },
            Failure::Checks(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Checks(names) => write!(f, "failed checks: {}", names.join(", ")),
        }
    }
}

/// Runs one parsed command to completion.
pub fn run_pipeline(command: &Command) -> Result<(), Failure> {
    let config = RunConfig::new(command).to_json();
    match command {
        Command::Extract(a) => commands::extract(a, &config),
        Command::Sparsify(a) => commands::sparsify(a, &config),
        Command::Predict(a) => commands::predict(a, &config),
        Command::Sweep(a) => commands::sweep(a, &config),
        Command::Fit(a) => commands::fit(a, &config),
        Command::Simulate(a) => commands::simulate(a, &config),
        Command::McNoise(a) => commands::mc_noise(a, &config),
        Command::Distribution(a) => commands::distribution(a, &config),
        Command::Verify(a) => commands::verify(a, &config),
        Command::Synth(a) => commands::synth(a, &config),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run_pipeline(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("andor: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
