use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use transit_fuse::config::LoadedConfig;
use transit_fuse::pipeline::{exit_code, Command, Run};

/// Fuse passenger-counter data with anonymized trip-chain traces.
#[derive(Parser)]
#[command(name = "transit-fuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `paths.out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a synthetic network with ground truth.
    Generate(Common),
    /// Compare trace ridership with counter ridership.
    Validate(Common),
    /// OD matrix and travel time, distance and flow distributions.
    Patterns(Common),
    /// Station catchment profiles.
    Coverage(Common),
    /// Random-forest fusion with importance and partial dependence.
    Fuse(Common),
    /// Every stage plus a combined report.
    Report(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, common) = match cli.command {
        Cmd::Generate(c) => (Command::Generate, c),
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Patterns(c) => (Command::Patterns, c),
        Cmd::Coverage(c) => (Command::Coverage, c),
        Cmd::Fuse(c) => (Command::Fuse, c),
        Cmd::Report(c) => (Command::Report, c),
    };
    let result = LoadedConfig::load(&common.config)
        .and_then(|loaded| Run::new(command, loaded, common.seed, common.out))
        .and_then(|run| run.execute(command));
    match &result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
