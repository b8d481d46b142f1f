//! Command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dictionary::SystemConfig;
use crate::error::{Error, Result};
use crate::io::read_json;
use crate::pipeline::{self, FitConfig, GenerateOptions, ModelKind, SynthConfig};
use crate::sbgm::VarianceForm;
use crate::selfcheck;

/// Exit code for a fit whose log-likelihood trace is not monotone.
pub const EXIT_NON_MONOTONE: u8 = 3;
/// Exit code for a failing self-check.
pub const EXIT_SELFCHECK: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "chansbgm", version, about = "Learn and sample physical channel parameter distributions")]
pub struct Cli {
    /// Worker threads (falls back to CHANSBGM_THREADS, then all cores).
    #[arg(long, global = true, env = "CHANSBGM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize ground-truth channels and noisy observations.
    Synth(SynthArgs),
    /// Fit a CSGMM or M-SBL model to a dataset.
    Fit(FitArgs),
    /// Sample parameters (and optionally channels) from a fitted model.
    Generate(GenerateArgs),
    /// Evaluate a generated batch.
    Metrics(MetricsArgs),
    /// Run the built-in invariant checks on small instances.
    Selfcheck,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Csgmm,
    Msbl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Full,
    Kronecker,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON with EM options; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long = "K")]
    pub components: Option<usize>,
    #[arg(long, value_enum)]
    pub variance_form: Option<FormArg>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory holding a fitted model.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p_max: Option<usize>,
    /// Also map parameters to channels.
    #[arg(long)]
    pub render: bool,
    /// JSON system configuration to render with instead of the training one.
    #[arg(long)]
    pub swap_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub batch: PathBuf,
    /// Dataset (ground-truth parameters) or batch to compare against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Report nMSE and cosine similarity against the reference channels.
    #[arg(long)]
    pub channel_metrics: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load_optional<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map(read_json).transpose().map(Option::unwrap_or_default)
}

fn run_fit(args: &FitArgs) -> Result<u8> {
    let mut config: FitConfig = load_optional(args.config.as_deref())?;
    if let Some(m) = args.model {
        config.model = match m {
            ModelArg::Csgmm => ModelKind::Csgmm,
            ModelArg::Msbl => ModelKind::Msbl,
        };
    }
    if let Some(k) = args.components {
        if config.model == ModelKind::Msbl && k != 1 {
            return Err(Error::invalid("M-SBL has exactly one component"));
        }
        config.components = k;
    }
    if let Some(f) = args.variance_form {
        config.variance_form = match f {
            FormArg::Full => VarianceForm::Full,
            FormArg::Kronecker => VarianceForm::Kronecker,
        };
    }
    if let Some(n) = args.max_iters {
        config.max_iters = n;
    }
    if let Some(t) = args.rel_tol {
        config.rel_tol = t;
    }
    let (_, trace, summary) = pipeline::fit(&args.dataset, &config, args.seed, &args.out)?;
    println!(
        "fit: K={} iterations={} converged={} log-likelihood={:.6e}",
        summary.components,
        trace.iterations,
        trace.converged,
        summary.final_log_likelihood
    );
    if let Some(u) = summary.first_violation {
        eprintln!("log-likelihood decreased at iteration {u}");
        return Ok(EXIT_NON_MONOTONE);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Synth(args) => {
            let config: SynthConfig = load_optional(args.config.as_deref())?;
            let m = pipeline::synth(&config, args.seed, &args.out)?;
            println!("synth: {} samples written to {}", m.samples, args.out.display());
            Ok(0)
        }
        Command::Fit(args) => run_fit(&args),
        Command::Generate(args) => {
            let swap_config = args
                .swap_config
                .as_deref()
                .map(read_json::<SystemConfig>)
                .transpose()?;
            let opts = GenerateOptions {
                n: args.n,
                p_max: args.p_max,
                render: args.render,
                swap_config,
            };
            let batch = pipeline::generate(&args.model, &opts, args.seed, &args.out)?;
            println!("generate: {} samples written to {}", batch.len(), args.out.display());
            Ok(0)
        }
        Command::Metrics(args) => {
            let report = pipeline::metrics(&args.batch, args.reference.as_deref(), args.channel_metrics, &args.out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
        Command::Selfcheck => {
            let failures = selfcheck::run_all(&mut std::io::stdout());
            Ok(if failures == 0 { 0 } else { EXIT_SELFCHECK })
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
