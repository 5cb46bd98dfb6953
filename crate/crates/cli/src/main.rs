use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use indexflow_cli::{run, summary, write_artifacts, Command, ConfigSource, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Sf,
    Signatures,
    Maslov,
    Pair,
    Yn,
    Approx,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Sf => Command::Sf,
            Sub::Signatures => Command::Signatures,
            Sub::Maslov => Command::Maslov,
            Sub::Pair => Command::Pair,
            Sub::Yn => Command::Yn,
            Sub::Approx => Command::Approx,
        }
    }
}

/// Spectral flow, partial signatures and Maslov indices from a JSON config.
///
/// Exit status: 0 on success, 2 when a check finds a mismatch, 1 on errors.
#[derive(Debug, Parser)]
#[command(name = "indexflow", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    config: PathBuf,
    /// Output directory for report.json, trace.csv, plot.dat and meta.json.
    #[arg(long, default_value = "indexflow-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cmd = Command::from(args.command);
    let result = ConfigSource::read(&args.config)
        .and_then(|src| run(cmd, &src, &Overrides { seed: args.seed, tol: args.tol }))
        .and_then(|outcome| write_artifacts(&args.out, cmd, &args.config, &outcome).map(|_| outcome));
    match result {
        Ok(outcome) => {
            println!("{}", summary(&outcome.report));
            if outcome.mismatch {
                eprintln!("check failed: see {}", args.out.join("report.json").display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("indexflow: {e}");
            ExitCode::from(1)
        }
    }
}
