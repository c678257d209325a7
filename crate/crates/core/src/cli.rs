//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification check fails or an
//! experiment aborts, 2 for usage and configuration errors. The thread
//! count follows `RAYON_NUM_THREADS` and never changes results.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{
    load_config, parse_config_with, ExperimentKind, OutputFormat, Overrides, RunConfig,
};
use crate::experiments::{correlation_experiment, nmse_sweep};
use crate::output::{emit, render_correlation, render_nmse};
use crate::quantizer::ZeroSign;
use crate::verify::{run_verification, VerifyOptions};
use crate::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sdmimo",
    version,
    about = "Channel estimation with spatial sigma-delta receivers",
    after_help = "Set RAYON_NUM_THREADS to control the worker count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NMSE versus SNR sweep over Monte Carlo trials.
    Nmse(NmseArgs),
    /// Per-antenna correlation between converter input and quantization noise.
    Correlation(CorrelationArgs),
    /// Run the invariant battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct NmseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// SNR points in dB (repeat or comma-separate).
    #[arg(
        long = "snr-db",
        value_delimiter = ',',
        allow_hyphen_values = true,
        num_args = 1
    )]
    pub snr_db: Vec<f64>,
    /// Monte Carlo trials per SNR point.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorrelationArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Operating SNR in dB.
    #[arg(long = "snr-db", allow_negative_numbers = true, num_args = 1)]
    pub snr_db: Option<f64>,
    /// Number of independent draws.
    #[arg(long)]
    pub draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Quantize zero to the negative level in the pilot check.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn resolve(common: &CommonArgs, mut overrides: Overrides) -> Result<RunConfig> {
    overrides.base_seed = common.seed;
    overrides.output_path = common.out.clone();
    overrides.output_format = common.format.map(Into::into);
    match &common.config {
        Some(path) => load_config(path, &overrides),
        None => parse_config_with("", &overrides),
    }
}

fn run_nmse(args: &NmseArgs) -> Result<u8> {
    let config = resolve(
        &args.common,
        Overrides {
            experiment: Some(ExperimentKind::NmseSweep),
            snr_db_list: (!args.snr_db.is_empty()).then(|| args.snr_db.clone()),
            n_trials: args.trials,
            ..Overrides::default()
        },
    )?;
    let table = nmse_sweep(&config.monte_carlo)?;
    emit(&render_nmse(&table, &config), config.output_path.as_deref())?;
    Ok(EXIT_OK)
}

fn run_correlation(args: &CorrelationArgs) -> Result<u8> {
    let config = resolve(
        &args.common,
        Overrides {
            experiment: Some(ExperimentKind::Correlation),
            snr_db_list: args.snr_db.map(|v| vec![v]),
            n_draws: args.draws,
            ..Overrides::default()
        },
    )?;
    let profile = correlation_experiment(&config.correlation())?;
    emit(
        &render_correlation(&profile, &config),
        config.output_path.as_deref(),
    )?;
    Ok(EXIT_OK)
}

fn run_verify(args: &VerifyArgs) -> Result<u8> {
    let options = VerifyOptions {
        pilot_zero_sign: if args.inject_fault {
            ZeroSign::Negative
        } else {
            ZeroSign::Positive
        },
        seed: args.seed,
        ..VerifyOptions::default()
    };
    let report = run_verification(&options)?;
    print!("{report}");
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

/// Exit status for an error that aborted a command.
pub fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::InvalidInput(_) | Error::Io { .. } => EXIT_USAGE,
        _ => EXIT_CHECK_FAILED,
    }
}

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let outcome = match &cli.command {
        Command::Nmse(a) => run_nmse(a),
        Command::Correlation(a) => run_correlation(a),
        Command::Verify(a) => run_verify(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
