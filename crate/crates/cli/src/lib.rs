//! `msc`: experiment runner for the maskcomp codecs, bounds, wire format and
//! split-learning simulator.
//!
//! Exit codes: 0 success, 1 runtime failure or divergence, 2 invalid
//! configuration or input, 3 malformed wire frame.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use maskcomp::bounds::BoundInputs;

pub mod commands;
pub mod config;
pub mod error;
pub mod sweep;
pub mod tensor_file;

use config::ExperimentConfig;
pub use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "MSC_THREADS";
pub const DEFAULT_BIAS_SAMPLES: usize = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "msc", version, about = "Mask-encoded sparsification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides `seed` in the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature maps per sweep row.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean reconstruction error of each codec on synthetic feature maps.
    ErrorSweep(Common),
    /// Train the split-learning simulator and write its trace.
    Train(Common),
    /// Evaluate the QU/SP/MS error bounds and the dominance conditions.
    Bounds(BoundsArgs),
    /// Monte Carlo estimate of E[ReLU(Z)] against ReLU(E[Z]).
    BiasDemo {
        #[arg(long, default_value_t = DEFAULT_BIAS_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compress a tensor file into a wire frame.
    Encode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decode a wire frame into a tensor file.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Original tensor file, to report the reconstruction error.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k1: usize,
    #[arg(long)]
    pub k2: usize,
    #[arg(long)]
    pub q1: u32,
    #[arg(long)]
    pub q2: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub norm_sq: f64,
    /// Evaluate even when the three codecs spend different bit budgets.
    #[arg(long)]
    pub allow_unmatched: bool,
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    Ok(ExperimentConfig::load(common.config.as_deref())?.resolve(common.out.clone(), common.seed, common.samples))
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} = {v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Executes a parsed command, returning the text to print on stdout.
pub fn execute(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::ErrorSweep(common) => {
            let cfg = load(&common)?;
            thread_pool()?.install(|| commands::cmd_error_sweep(&cfg))
        }
        Command::Train(common) => commands::cmd_train(&load(&common)?),
        Command::Bounds(a) => {
            let inputs = BoundInputs::new(a.d, a.k1, a.k2, a.q1, a.q2, a.alpha, a.norm_sq);
            commands::cmd_bounds(&inputs, a.allow_unmatched)
        }
        Command::BiasDemo { samples, seed } => commands::cmd_bias_demo(samples, seed),
        Command::Encode { config, input, output } => {
            let cfg = ExperimentConfig::load(Some(&config))?;
            commands::cmd_encode(&cfg, &input, &output)
        }
        Command::Decode {
            input,
            output,
            reference,
        } => commands::cmd_decode(&input, &output, reference.as_deref()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            match &e {
                CliError::Wire(w) => eprintln!("error {}: {w}", w.code()),
                other => eprintln!("error: {other}"),
            }
            e.exit_code()
        }
    }
}
