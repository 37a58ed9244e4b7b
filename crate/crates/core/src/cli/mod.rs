//! Command-line front end.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{ConfigError, Error, Result};
pub use config::{
    parse_coefficient_spec, parse_config, CompareTolerances, OutputFormat, RunConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BREACH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

/// Relative tolerance of `oracle-check`.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "ecir",
    version,
    about = "Extended CIR bond pricing by Malliavin series"
)]
pub struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Series price for the configured model.
    Price,
    /// Series, Monte Carlo and Riccati prices with tolerance checks.
    Compare,
    /// Preset volatility sweep, price by term count.
    #[command(name = "experiment-s4")]
    ExperimentS4,
    /// Symbolic expansion against the recurrences on random tuples.
    #[command(name = "oracle-check")]
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 100)]
        tuples: usize,
    },
    /// Print the symbolic expansion of order `n`.
    #[command(name = "dump-terms")]
    DumpTerms { n: usize },
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Capacity { .. } | Error::Budget { .. } | Error::SeriesDivergence { .. } => {
            EXIT_CAPACITY
        }
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` and runs the command, printing to `stdout`/`stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok((text, code)) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error [E_IO]: {e}");
                return EXIT_CONFIG;
            }
            code
        }
        Err(e) => {
            let tag = match &e {
                Error::Config(c) => c.code(),
                Error::Expression(_) => "E_SYNTAX",
                Error::Capacity { .. } => "E_CAPACITY",
                Error::Budget { .. } => "E_BUDGET",
                Error::SeriesDivergence { .. } => "E_DIVERGENCE",
                _ => "E_INVALID_VALUE",
            };
            let _ = writeln!(stderr, "error [{tag}]: {e}");
            exit_code(&e)
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let Some(path) = &cli.config else {
        return Err(ConfigError::Io("--config is required for this command".into()).into());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(String, i32)> {
    match &cli.command {
        Command::Price => Ok((commands::run_price(&load(cli)?)?, EXIT_OK)),
        Command::Compare => {
            let cfg = load(cli)?;
            let c = commands::compare(&cfg)?;
            let mut text = commands::render_comparison(&cfg, &c);
            for b in &c.breaches {
                text.push_str("# breach: ");
                text.push_str(b);
                text.push('\n');
            }
            Ok((text, if c.passed() { EXIT_OK } else { EXIT_BREACH }))
        }
        Command::ExperimentS4 => {
            let cfg = load(cli)?;
            let rows = commands::experiment_s4(&cfg)?;
            Ok((commands::render_experiment(&rows), EXIT_OK))
        }
        Command::OracleCheck { max_n, tuples } => {
            let (t, maturity, seed) = match &cli.config {
                Some(_) => {
                    let cfg = load(cli)?;
                    (cfg.window.t(), cfg.window.maturity(), cfg.mc.seed)
                }
                None => (
                    0.8,
                    1.0,
                    cli.seed.unwrap_or(crate::oracles::McConfig::default().seed),
                ),
            };
            let check = commands::oracle_check(t, maturity, *max_n, *tuples, seed)?;
            let code = if check.max_error() <= ORACLE_TOLERANCE {
                EXIT_OK
            } else {
                EXIT_BREACH
            };
            Ok((commands::render_oracle_check(&check), code))
        }
        Command::DumpTerms { n } => Ok((commands::run_dump_terms(*n)?, EXIT_OK)),
    }
}
