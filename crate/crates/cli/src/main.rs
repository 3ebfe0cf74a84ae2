use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_field_cli::{describe, run_config, CliError, ExperimentConfig, JumpFormat, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "levy-field", version, about = "Simulate and verify Lévy-valued random measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of an experiment config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
        /// Format of exported jump records.
        #[arg(long, value_enum)]
        format: Option<JumpFormat>,
    },
    /// Print a summary of a preset such as `balan-stable(1.5,0.5,0.5)`.
    Describe {
        preset: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Describe { preset, dim } => {
            print!("{}", describe(&preset, dim)?);
            Ok(0)
        }
        Command::Run { config, output_dir, format } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_toml(&text)?;
            let outcome = run_config(&cfg, output_dir.as_deref(), format)?;
            for (label, message) in &outcome.errors {
                eprintln!("task {label} failed: {message}");
            }
            if !outcome.reports.is_empty() {
                print!("{}", levy_field::verify::summary_table(&outcome.reports));
            }
            println!("wrote {} artifact(s) to {}", outcome.artifacts.len(), outcome.dir.display());
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("levy-field: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
