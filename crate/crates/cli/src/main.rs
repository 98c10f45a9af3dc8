use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixeig::{execute, CliResult, LoadedConfig, Outcome, Task};

#[derive(Parser)]
#[command(name = "mixeig", version, about = "Eigenpairs and property checks for the mixed local/nonlocal p-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenpair: eigenpair.json, eigenfunction.csv
    Solve(Args),
    /// First two levels: spectrum.json, eigenfunction1.csv, eigenfunction2.csv
    Spectrum(Args),
    /// Property suite: report.json; exits 1 if any applicable check fails
    Verify(Args),
    /// Comparison with the dense or brute-force oracle: oracle.json
    Oracle(Args),
    /// Whatever the config's `task` names
    Run(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides MIXEIG_OUT_DIR and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(task: Option<Task>, args: &Args) -> CliResult<Outcome> {
    let mut cfg = LoadedConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let out = cfg.output_dir(args.out.as_deref());
    execute(task.unwrap_or(cfg.config.task), &cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match &cli.command {
        Command::Solve(a) => (Some(Task::Solve), a),
        Command::Spectrum(a) => (Some(Task::Spectrum), a),
        Command::Verify(a) => (Some(Task::Verify), a),
        Command::Oracle(a) => (Some(Task::Oracle), a),
        Command::Run(a) => (None, a),
    };
    match run(task, args) {
        Ok(outcome) => {
            // a closed pipe only loses the summary, never the files
            let mut out = std::io::stdout().lock();
            for line in &outcome.lines {
                let _ = writeln!(out, "{line}");
            }
            for file in &outcome.files {
                let _ = writeln!(out, "wrote {}", file.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
