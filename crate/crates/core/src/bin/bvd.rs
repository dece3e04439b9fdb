use std::path::PathBuf;
use std::process::ExitCode;

use bvd::experiment::{run, threads_from_env, Command};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bvd",
    version,
    about = "Bias-variance decompositions from JSON experiment specs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Io {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose the expected loss of a prediction ensemble.
    Decompose(Io),
    /// Compute central label and/or central prediction.
    Centroid(Io),
    /// Test whether a loss behaves like a g-Bregman divergence.
    Classify(Io),
    /// Decompose across values of one divergence parameter.
    Sweep(Io),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, io) = match cli.command {
        Cmd::Decompose(io) => (Command::Decompose, io),
        Cmd::Centroid(io) => (Command::Centroid, io),
        Cmd::Classify(io) => (Command::Classify, io),
        Cmd::Sweep(io) => (Command::Sweep, io),
    };
    let result = threads_from_env().and_then(|threads| {
        if let Some(n) = threads {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        run(command, &io.spec, &io.out)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bvd {command}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
