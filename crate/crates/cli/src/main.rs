use std::path::PathBuf;
use std::process::ExitCode;

use beamtrack_cli::{generate, report, track, train, CliResult, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

/// mmWave beam tracking experiments: Oracle, particle filter and RNN trackers.
#[derive(Parser)]
#[command(name = "beamtrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides both the scenario and the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training dataset of every cell as CSV.
    Generate(Common),
    /// Train one model per cell; writes the model and its loss trace.
    Train(Common),
    /// Track the evaluation realizations with every tracker.
    Track {
        #[command(flatten)]
        common: Common,
        /// Model file to use instead of the one in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Summarize the tracks files into one table.
    Report(Common),
    /// train, track and report in one go.
    All(Common),
    /// Print the default config as TOML.
    Defaults,
}

fn load(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Generate(c) => generate(&load(&c)?),
        Command::Train(c) => train(&load(&c)?),
        Command::Track { common, model } => track(&load(&common)?, model.as_deref()),
        Command::Report(c) => Ok(vec![report(&load(&c)?)?]),
        Command::Defaults => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(Vec::new())
        }
        Command::All(c) => {
            let cfg = load(&c)?;
            let mut written = train(&cfg)?;
            written.extend(track(&cfg, None)?);
            written.push(report(&cfg)?);
            Ok(written)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("beamtrack: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
