//! `aoigame`: command-line front end for the sampling-rate game.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_core::AoiError;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
mod config;
mod table;

use commands::Ctx;
use config::{ScenarioConfig, DEFAULT_SEED};
use table::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// The reader went away (for example `| head`); not an error.
    #[error("output closed")]
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Closed => 0,
        }
    }
}

impl From<AoiError> for CliError {
    fn from(e: AoiError) -> Self {
        match e {
            AoiError::Domain(_) | AoiError::InvalidIndex { .. } => CliError::Config(e.to_string()),
            AoiError::Consistency(_) => CliError::Invariant(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "aoigame", version, about = "Age-of-information sampling game: equilibria, mechanisms and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results are identical for any value.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Equilibrium, optimum and price of anarchy.
    Solve,
    /// Discount-factor thresholds per platform.
    Thresholds,
    /// Cooperation profile over the discount grid.
    Profile,
    /// Social-cost ratio curves.
    Ratio,
    /// Repeated-game simulation.
    Simulate,
    /// Monte-Carlo check of the queue model against the closed form.
    QueueValidate,
}

impl Command {
    /// Curves default to CSV, summaries to JSON.
    fn default_format(self) -> Format {
        match self {
            Command::Solve | Command::Thresholds => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(rep: &Report, fmt: Format, out: Option<&Path>) -> Result<(), CliError> {
    let mut w = sink(out)?;
    match fmt {
        Format::Csv => {
            rep.write_csv(&mut w)?;
            if let Some(p) = out {
                let mut s = BufWriter::new(File::create(summary_path(p))?);
                serde_json::to_writer_pretty(&mut s, &rep.summary).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(s)?;
                s.flush()?;
            }
        }
        Format::Json => {
            rep.write_json(&mut w)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `<out>.summary.json` next to a CSV output.
fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ScenarioConfig::load(path)?;
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ctx = Ctx { seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED), pool };
    let fmt = cli.format.unwrap_or(cli.command.default_format());
    let out = cli.out.as_deref();
    let rep = match cli.command {
        Command::Solve => commands::solve(&cfg, &ctx)?,
        Command::Thresholds => commands::thresholds(&cfg)?,
        Command::Profile => commands::profile(&cfg, &ctx)?,
        Command::Ratio => commands::ratio(&cfg, &ctx)?,
        Command::QueueValidate => commands::queue_validate(&cfg, &ctx)?,
        Command::Simulate => {
            let trace = commands::simulate(&cfg, &ctx)?;
            let mut w = sink(out)?;
            match fmt {
                Format::Csv => {
                    // Buffered so a closed stdout surfaces as an io error here, not inside the core writer.
                    let mut buf = Vec::new();
                    trace.write_csv(&mut buf)?;
                    w.write_all(&buf)?;
                    if let Some(p) = out {
                        std::fs::write(summary_path(p), trace.summary_json()? + "\n")?;
                    }
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &serde_json::json!({
                        "summary": trace.summary,
                        "records": trace.records,
                    }))
                    .map_err(|e| CliError::Io(e.to_string()))?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            return Ok(());
        }
    };
    emit(&rep, fmt, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) | Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aoigame: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
