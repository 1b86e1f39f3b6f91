//! `rabi-cf`: batch front end for the continued-fraction spectrum solver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};

use commands::{Command, Invocation, PartialOutput, RunFailure};
use config::Format;

#[derive(Debug, Parser)]
#[command(name = "rabi-cf", version, about = "Regular spectra of two-mode and k-photon Rabi models by continued fractions")]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one key, e.g. --set model.g=0.3 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output file; overrides output.path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format; overrides output.format.
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Also emit F(E) grid samples (spectrum only); overrides output.trace.
    #[arg(long)]
    trace: bool,
}

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_REGIME: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rabi_cf_core::Error>() {
            return if e.is_regime() {
                EXIT_REGIME
            } else if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            };
        }
        if let Some(p) = cause.downcast_ref::<PartialOutput>() {
            return match p.failure {
                RunFailure::CrosscheckFailed { .. } => EXIT_NUMERICAL,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_INVALID
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("RABI_CF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow::anyhow!("RABI_CF_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow::anyhow!("thread pool: {e}"))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let mut config = config::load(cli.config.as_deref(), &cli.set)?;
    if let Some(f) = cli.format {
        config.output.format = f;
    }
    if let Some(out) = &cli.out {
        config.output.path = out.to_string_lossy().into_owned();
    }
    config.output.trace |= cli.trace;

    let path = (config.output.path != "-").then(|| PathBuf::from(&config.output.path));
    let trace = config.output.trace && cli.command == Command::Spectrum;
    if trace && config.output.format == Format::Csv && path.is_none() {
        anyhow::bail!("trace output in CSV needs a file path (--out), since it is written to a second file");
    }

    let inv = Invocation { config: &config, trace };
    match commands::run(cli.command, &inv) {
        Ok(report) => output::emit(&report, config.output.format, path.as_deref()),
        Err(err) => match err.downcast::<PartialOutput>() {
            Ok(partial) => {
                output::emit(&partial.report, config.output.format, path.as_deref())?;
                Err(partial.into())
            }
            Err(err) => Err(err),
        },
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().after_long_help(config::key_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rabi-cf: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
