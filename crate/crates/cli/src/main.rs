use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ibnr_cli::config::RawTime;
use ibnr_cli::{parse_config, run, CliError, Command, Format, Overrides};

#[derive(Parser)]
#[command(name = "ibnr", version, about = "Moments, workload and transforms of Markov-modulated IBNR processes")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Limits as t → ∞.
    Asymptotic(Opts),
    /// Moments at a finite time.
    Transient(Opts),
    /// Joint transform at a finite time or in the limit.
    Mgf(Opts),
    /// Monte Carlo estimates with standard errors.
    Simulate(Opts),
    /// Exact values next to simulated estimates and z-scores.
    Compare(Opts),
    /// The embedded batch chain of a semi-Markov spec.
    EmbedInfo(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// A time point or `limit`.
    #[arg(long)]
    t: Option<RawTime>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    tol: Option<f64>,
}

fn execute(command: Command, opts: Opts) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&opts.config)
        .map_err(|e| CliError::config(format!("{}: {e}", opts.config.display()), ""))?;
    let overrides = Overrides { seed: opts.seed, reps: opts.reps, t: opts.t, out: opts.out, format: opts.format, tol: opts.tol };
    let cfg = parse_config(&text, command, &overrides)?;
    let report = run(&cfg)?;
    if cfg.output.format == Format::Csv {
        for note in &report.notes {
            eprintln!("note: {note}");
        }
    }
    report.emit(cfg.output.format, cfg.output.path.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Sub::Asymptotic(o) => (Command::Asymptotic, o),
        Sub::Transient(o) => (Command::Transient, o),
        Sub::Mgf(o) => (Command::Mgf, o),
        Sub::Simulate(o) => (Command::Simulate, o),
        Sub::Compare(o) => (Command::Compare, o),
        Sub::EmbedInfo(o) => (Command::EmbedInfo, o),
    };
    match execute(command, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
