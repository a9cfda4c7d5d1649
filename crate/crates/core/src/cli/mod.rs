//! Command-line front end.

pub mod commands;
pub mod config;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{game_and_params, run, sweep_points, Command, RunFlags, SweepPoint};
pub use config::{parse_config, parse_config_str, ConfigDocument, GameKind};
pub use report::{RunReport, Table};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Parser)]
#[command(
    name = "nagsens",
    version,
    about = "Equilibria and sensitivity of network aggregative games"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: CommandArg,
    /// JSON game configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; results go to standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Residual tolerance override.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandArg {
    /// Nash equilibrium and KKT multipliers.
    Solve,
    /// Strong-monotonicity certificate.
    Certify,
    /// Equilibrium sensitivity with respect to the cost parameters.
    Sens,
    /// Leontief, Bonacich and key-player tables.
    Centrality,
    /// Ex-post and ex-ante pinning targets.
    Target,
    /// Friedkin–Johnsen opinion trajectory.
    FjSim,
    /// Total travel time over a grid of edge parameters and informed fractions.
    RoutingSweep,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Solve => Command::Solve,
            CommandArg::Certify => Command::Certify,
            CommandArg::Sens => Command::Sens,
            CommandArg::Centrality => Command::Centrality,
            CommandArg::Target => Command::Target,
            CommandArg::FjSim => Command::FjSim,
            CommandArg::RoutingSweep => Command::RoutingSweep,
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_)
        | Error::Configuration(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedRegime(_) => 2,
        Error::CqViolation(_) | Error::CertificateRefused(_) | Error::IllConditioned { .. } => 3,
        Error::NonConvergence { .. } | Error::StepTooLarge { .. } => 4,
        _ => 1,
    }
}

/// Machine-readable error object.
pub fn error_object(err: &Error) -> serde_json::Value {
    let mut obj = serde_json::json!({
        "kind": err.kind(),
        "message": err.to_string(),
    });
    match err {
        Error::Validation(list) => obj["errors"] = serde_json::json!(list),
        Error::CqViolation(r) => {
            obj["rank"] = r.rank.into();
            obj["rows"] = r.a.nrows().into();
            obj["full_row_rank"] = r.full_row_rank.into();
            obj["strict_complementarity"] = r.strict_complementarity.into();
            obj["offending_rows"] = serde_json::json!(r.offending_rows);
        }
        Error::NonConvergence { iterations, residual } => {
            obj["iterations"] = (*iterations).into();
            obj["residual"] = (*residual).into();
        }
        Error::Infeasible { certificate, .. } => obj["certificate"] = serde_json::json!(certificate),
        _ => {}
    }
    obj
}

fn execute(args: &Args) -> crate::Result<()> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::Configuration("--config PATH is required".into()))?;
    let raw = std::fs::read(path)?;
    let text = String::from_utf8(raw.clone())
        .map_err(|e| Error::Validation(vec![format!("configuration is not UTF-8: {e}")]))?;
    let doc = parse_config_str(&text)?;
    let flags = RunFlags {
        seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let report = run(args.command.into(), &doc, &raw, &flags)?;
    let (csv, json) = match args.format {
        Format::Csv => (true, false),
        Format::Json => (false, true),
        Format::Both => (true, true),
    };
    match &args.out {
        Some(dir) => report.write(dir, csv, json),
        None => {
            let mut out = std::io::stdout().lock();
            if json {
                let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
                writeln!(out, "{text}")?;
            } else {
                for t in &report.tables {
                    writeln!(out, "# {}", t.name)?;
                    out.write_all(&t.to_csv()?)?;
                }
            }
            Ok(())
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main_entry() -> i32 {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => 0,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(err) => {
            eprintln!("{}", error_object(&err));
            exit_code(&err)
        }
    }
}
