use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfrl::harness::{self, Command, Overrides};

#[derive(Parser)]
#[command(name = "cfrl", version, about = "Counterfactual evaluation and policy search on structural causal models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Collect a replay buffer with the behaviour policy
    GenData(RunArgs),
    /// Run the configured off-policy estimators
    Eval(RunArgs),
    /// Run policy search and write metrics and checkpoints
    Search(RunArgs),
    /// Check the inference invariants on fixtures and random models
    Verify(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(harness::exit::CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let (command, args) = match cli.command {
        Cmd::GenData(a) => (Command::GenData, a),
        Cmd::Eval(a) => (Command::Eval, a),
        Cmd::Search(a) => (Command::Search, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let overrides = Overrides { seed: args.seed, workers: args.workers, out: args.out };
    match harness::run(command, &args.config, &overrides) {
        Ok(m) => {
            for o in &m.outputs {
                println!("{o}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
