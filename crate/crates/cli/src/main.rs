//! `diversity`: classify drift specifications, simulate market weights and
//! cross-check the two.
//!
//! Exit codes: 0 success (whatever the verdict), 2 config error, 3 numeric
//! failure, 4 I/O failure.

mod commands;
mod config;
mod error;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{write_artifacts, Outcome};
use crate::config::{ExperimentConfig, Format, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "diversity",
    version,
    about = "Diversity criteria, Feller boundary tests and Monte Carlo checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `[sim] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `[outputs] directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma separated subset of csv,json,svg; overrides `[outputs] formats`.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<String>>,

    /// No status lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic diversity verdict for `[model]`, as JSON on stdout.
    Classify,
    /// Monte Carlo hitting frequencies for `[model]` and `[sim]`.
    Simulate,
    /// Analytic verdicts against simulated frequencies over the `[verify]` grid.
    Verify,
    /// Feller boundary classification for `[feller]`, as JSON on stdout.
    Feller,
    /// Built-in checks against known verdicts.
    Selftest,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    let formats = cli
        .format
        .as_ref()
        .map(|fs| {
            fs.iter()
                .map(|s| Format::parse(s))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        formats,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Selftest = cli.command {
        return selftest::run(cli.quiet);
    }
    let cfg = load(cli)?;
    let outcome: Outcome = match cli.command {
        Command::Classify => commands::cmd_classify(&cfg)?,
        Command::Simulate => commands::cmd_simulate(&cfg)?,
        Command::Verify => commands::cmd_verify(&cfg)?,
        Command::Feller => commands::cmd_feller(&cfg)?,
        Command::Selftest => unreachable!(),
    };
    let dir = cfg.outputs().directory;
    write_artifacts(&dir, &outcome.artifacts)?;
    if let Some(text) = &outcome.stdout {
        print!("{text}");
    }
    if !cli.quiet {
        eprintln!("{}", outcome.summary);
        for a in &outcome.artifacts {
            eprintln!("wrote {}", dir.join(a.name).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
