//! `instashap` command line: synthetic experiments, tabular trust-gap runs and explanations of
//! saved models. Every command writes into `--out` and prints a one-line JSON status.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use instashap::Error;

pub const THREADS_ENV: &str = "INSTASHAP_THREADS";

#[derive(Parser, Debug)]
#[command(name = "instashap", version, about = "Masked additive models with instant Shapley attributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-feature world f = x + xy: learned vs analytic purified effects and Shapley values.
    Synth2d(Synth2dArgs),
    /// Ten-feature multilinear benchmark: per-epoch SHAP error of FastSHAP and InstaSHAP.
    Synth10d(Synth10dArgs),
    /// CSV dataset: surrogate, frontier search, GAM-1 and GAM-k, and an unmasked reference.
    Tabular(TabularArgs),
    /// Attributions of a saved model at the rows of a CSV.
    Explain(ExplainArgs),
}

#[derive(Args, Debug)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with a partial or full run config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct Synth2dArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Points per axis of the exported grids.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct Synth10dArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Largest monomial order of the target.
    #[arg(long)]
    pub kstar: Option<usize>,
    /// Coefficient distribution: normal or laplace.
    #[arg(long)]
    pub dist: Option<String>,
    /// fastshap or instashap; repeat for both (the default).
    #[arg(long)]
    pub method: Vec<String>,
    /// Training epochs of the explainers.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// surrogate or oracle.
    #[arg(long)]
    pub removal: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_eval: Option<usize>,
    #[arg(long)]
    pub surrogate_epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TabularArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    /// reg or clf; inferred from the target column when omitted.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Tuples added per search round.
    #[arg(long)]
    pub tuples: Option<usize>,
    /// Columns to treat as categorical (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Prefixes of one-hot column groups to fold into one categorical feature.
    #[arg(long, value_delimiter = ',')]
    pub collapse: Vec<String>,
    /// Columns to ignore.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Training epochs of both additive models.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub surrogate_epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Headered numeric CSV with one column per model feature.
    #[arg(long)]
    pub points: PathBuf,
    /// shapley, faith, sii, taylor or nshap.
    #[arg(long, default_value = "shapley")]
    pub family: String,
    #[arg(short, long, default_value_t = 1)]
    pub k: usize,
    /// Model that an amortized head explains; its queries are counted.
    #[arg(long)]
    pub target_model: Option<PathBuf>,
}

fn configure_threads() -> instashap::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{THREADS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let doc = serde_json::json!({ "status": "error", "error": { "kind": kind, "message": message } });
    eprintln!("{doc}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string(), 2),
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Synth2d(a) => commands::synth2d(a),
        Command::Synth10d(a) => commands::synth10d(a),
        Command::Tabular(a) => commands::tabular(a),
        Command::Explain(a) => commands::explain(a),
    });
    match result {
        Ok(out) => {
            println!("{}", serde_json::json!({ "status": "ok", "out": out.display().to_string() }));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
