mod cli;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use cli::{merge, merge_global, Cli, Command, ConfigFile};
use commands::{Report, UsageError};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn run(cli: &Cli) -> anyhow::Result<(Report, bool)> {
    let config = match &cli.global.config {
        Some(path) => ConfigFile::load(path).map_err(|e| UsageError(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    let global = merge_global(&cli.global, &config);
    if let Some(threads) = global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| UsageError(format!("--threads {threads}: {e}")))?;
    }
    let section = config.section(cli.command.name());
    let merged = |e: anyhow::Error| UsageError(format!("{e:#}"));
    let report = match &cli.command {
        Command::Build(a) => commands::build(&global, &merge(a, section).map_err(merged)?),
        Command::Rip(a) => commands::rip(&global, &merge(a, section).map_err(merged)?),
        Command::Deps(a) => commands::deps(&global, &merge(a, section).map_err(merged)?),
        Command::Bounds(a) => commands::bounds(&global, &merge(a, section).map_err(merged)?),
        Command::Recover(a) => commands::recover(&global, &merge(a, section).map_err(merged)?),
        Command::Bench(a) => commands::bench(&global, &merge(a, section).map_err(merged)?),
    }?;
    Ok((report, global.json))
}

/// Bad flags or inputs exit with 2, anything else that went wrong with 1.
fn is_usage(e: &anyhow::Error) -> bool {
    use structcs_core::Error as E;
    if e.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    matches!(
        e.downcast_ref::<E>(),
        Some(
            E::ZeroDimension { .. }
                | E::InconsistentDims(_)
                | E::Unsupported(_)
                | E::IndexOutOfRange { .. }
                | E::DimensionMismatch { .. }
                | E::WrongKind { .. }
                | E::GuardExceeded { .. }
                | E::InvalidParameter(_)
                | E::NonFinite
                | E::Format(_)
        )
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging(cli.global.verbose, cli.global.quiet);
    match run(&cli) {
        Ok((report, json)) => {
            if json {
                let text = serde_json::to_string_pretty(&report.json).expect("reports serialize");
                let _ = writeln!(std::io::stdout(), "{text}");
            } else if !report.text.is_empty() {
                let _ = writeln!(std::io::stdout(), "{}", report.text);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            error!("{e:#}");
            if is_usage(&e) {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
    }
}
