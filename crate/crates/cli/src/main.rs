use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drfp::harness::config::ExperimentConfig;
use drfp::harness::experiment::{compare_table, run_experiment, run_oracle, validate, write_outputs, Summary};
use drfp::Error;

/// Run D-RFP and baseline experiments from TOML configs.
#[derive(Parser)]
#[command(name = "drfp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv and summary.json.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve the centralized problem and print the reference optimum.
    Oracle { config: PathBuf },
    /// Check graphs and problem data without running.
    Validate { config: PathBuf },
    /// Run several experiments and print a comparison table.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<(), Error> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Error::io("writing to stdout", e)),
        _ => Ok(()),
    }
}

fn run_one(path: &Path, output: Option<PathBuf>) -> Result<Summary, Error> {
    let cfg = ExperimentConfig::load(path)?;
    let outcome = run_experiment(&cfg).map_err(|e| e.context(format!("running {}", path.display())))?;
    if let Some(dir) = output.or_else(|| cfg.output_dir()) {
        write_outputs(&dir, &outcome)?;
    }
    Ok(outcome.summary)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, output } => {
            let summary = run_one(&config, output)?;
            emit(&to_json(&summary))?;
        }
        Command::Oracle { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = cfg.build_problem()?;
            emit(&to_json(&run_oracle(&cfg, &built)?))?;
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            emit(&to_json(&validate(&cfg)?))?;
        }
        Command::Compare { configs } => {
            let summaries = configs
                .iter()
                .map(|c| run_one(c, None))
                .collect::<Result<Vec<_>, _>>()?;
            emit(&compare_table(&summaries))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
