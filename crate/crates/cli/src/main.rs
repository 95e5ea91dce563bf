//! `poisonlab` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use poisonlab_core::experiment::{
    parse_config, run_ablation, run_experiment, run_verification, ExperimentConfig, Suite,
};
use poisonlab_core::Error;

/// Environment variable naming the output directory when the config has none.
const OUTPUT_ENV: &str = "POISONLAB_OUTPUT_DIR";
const DEFAULT_OUTPUT: &str = "results";

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "poisonlab",
    version,
    about = "Backdoor reward-poisoning experiments on tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train baseline and attacked agents for every seed and write CSV results.
    Run {
        config: PathBuf,
        /// Overrides output_dir from the config and the environment.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a numerical verification suite: lemmas, theorems, counterexamples or all.
    Verify { suite: String },
    /// Re-run an experiment for each value of one config key.
    Ablate {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn output_dir(cli: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    cli.or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run { config, output } => {
            let cfg = load(&config)?;
            let dir = output_dir(output, &cfg);
            let outcome = run_experiment(&cfg, &dir)?;
            for row in &outcome.summary {
                println!(
                    "{:<9} asr {:.3} ± {:.3}  brr {:.3} ± {:.3}  poison rate {:.5}",
                    row.run_id,
                    row.final_asr_mean,
                    row.final_asr_std,
                    row.brr_mean,
                    row.brr_std,
                    row.poison_rate_mean
                );
            }
            println!("wrote {} files to {}", outcome.files.len(), dir.display());
            Ok(0)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let report = run_verification(suite)?;
            print!("{report}");
            Ok(if report.passed() { 0 } else { EXIT_VERIFY })
        }
        Command::Ablate {
            config,
            param,
            values,
            output,
        } => {
            let cfg = load(&config)?;
            let dir = output_dir(output, &cfg);
            let outcomes = run_ablation(&cfg, &dir, &param, &values)?;
            for (value, outcome) in values.iter().zip(&outcomes) {
                let row = outcome
                    .summary
                    .iter()
                    .find(|r| r.run_id == "attack")
                    .expect("attack row");
                println!(
                    "{param} = {value}: asr {:.3}  brr {:.3}",
                    row.final_asr_mean, row.brr_mean
                );
            }
            println!("wrote {}", dir.join("ablation.csv").display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
