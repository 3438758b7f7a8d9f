use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use harness::{emit_report, run, ExperimentConfig, Suite};

#[derive(Parser, Debug)]
#[command(
    name = "beltrami-lab",
    about = "Run Beltrami resolvent and weight experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file of overrides merged onto the suite defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the JSON and CSV reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size n of the main grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Run family members in parallel.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    Identity,
    Counterexample,
    Resolvent,
    Caccioppoli,
    Weights,
    Domains,
    All,
}

impl Command {
    fn suites(self) -> Vec<Suite> {
        match self {
            Command::Identity => vec![Suite::Identity],
            Command::Counterexample => vec![Suite::Counterexample],
            Command::Resolvent => vec![Suite::Resolvent],
            Command::Caccioppoli => vec![Suite::Caccioppoli],
            Command::Weights => vec![Suite::Weights],
            Command::Domains => vec![Suite::Domains],
            Command::All => Suite::ALL.to_vec(),
        }
    }
}

fn configure(cli: &Cli, suite: Suite) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(suite, path)?,
        None => ExperimentConfig::defaults(suite),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.grid {
        config.grid.n = n;
    }
    if cli.parallel {
        config.parallel = true;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut all_passed = true;
    for suite in cli.command.suites() {
        let outcome = configure(&cli, suite).and_then(|config| {
            let report = run(&config)?;
            if let Some(dir) = &config.output {
                emit_report(&report, dir)?;
            }
            Ok(report)
        });
        match outcome {
            Ok(report) => {
                print!("{}", report.summary());
                all_passed &= report.passed();
            }
            Err(e) => {
                eprintln!("suite {suite} failed: {e:#}");
                all_passed = false;
            }
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
