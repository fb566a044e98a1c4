use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use feynprop_cli::{run, CliError, Command, RunConfig};

/// Perturbative propagators for exponential and point-interaction potentials.
#[derive(Parser)]
#[command(name = "feynprop", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One row per query point with the truncated propagator.
    Propagate(Common),
    /// Order-by-order partial sums, increments and tail bounds.
    Converge(Common),
    /// Finite-difference Schrödinger residuals under step refinement.
    Residual(Common),
    /// Packet-smeared series against the Crank–Nicolson grid solver.
    OracleCompare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides output.path; stdout when neither is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides quadrature.seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    verbose: bool,
}

fn execute(command: Command, args: &Common) -> Result<bool, CliError> {
    let path = args.config.display().to_string();
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    if let Some(seed) = args.seed {
        cfg.quadrature.seed = seed;
    }
    let report = run(command, &cfg)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match out {
        Some(out) => std::fs::write(&out, &report.body).map_err(|source| CliError::Io {
            path: out.display().to_string(),
            source,
        })?,
        None => print!("{}", report.body),
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if args.verbose || command == Command::OracleCompare {
        eprintln!("{}: {}", command.name(), report.summary);
    }
    Ok(report.failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, args) = match &cli.command {
        Cmd::Propagate(a) => (Command::Propagate, a),
        Cmd::Converge(a) => (Command::Converge, a),
        Cmd::Residual(a) => (Command::Residual, a),
        Cmd::OracleCompare(a) => (Command::OracleCompare, a),
    };
    match execute(command, args) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: numerical failure in at least one row");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
