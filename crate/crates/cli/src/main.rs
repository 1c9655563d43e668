use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use dc3do_cli::commands;
use dc3do_cli::common::{CmdResult, ExitClass};
use dc3do_cli::config::ExperimentConfig;

/// Diffusion-based zero-shot 3D shape classification harness.
///
/// Exit codes: 0 on success, 1 on a validation error (bad arguments,
/// config, or inputs), 2 on a runtime failure.
#[derive(Parser)]
#[command(name = "dc3do", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config key, e.g. --set training.steps=200 (repeatable;
    /// overrides win over the file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> CmdResult<ExperimentConfig> {
        ExperimentConfig::load(&self.config, &self.overrides).or_validation()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the procedural dataset (.xyz files + manifest).
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the configured pathway; writes checkpoint.bin and loss.csv.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Continue from a previous run directory (its checkpoint.bin and
        /// run_train.json); step numbering continues.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Classify one input shape (.off, .ply, or .xyz); prints JSON.
    Classify {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Object id for the emitted record (default: input file stem).
        #[arg(long)]
        id: Option<String>,
    },
    /// Evaluate the held-out split; writes eval_report.{csv,json}.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// "multiclass" scores all candidates at once; "binary" runs the
        /// one-vs-rest protocol against complement labels.
        #[arg(long, default_value = "multiclass")]
        mode: String,
    },
    /// Render depth views of one input shape as PGM images.
    Render {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
    },
    /// Accuracy/wall-time grid over image sizes and view counts.
    AblateViews {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn dispatch(command: Command) -> CmdResult<()> {
    match command {
        Command::GenData { config } => commands::gen_data::run(&config.load()?),
        Command::Train { config, resume } => {
            commands::train::run(&config.load()?, resume.as_deref())
        }
        Command::Classify {
            config,
            checkpoint,
            input,
            id,
        } => commands::classify::run(&config.load()?, &checkpoint, &input, id.as_deref()),
        Command::Eval {
            config,
            checkpoint,
            mode,
        } => {
            let mode = match mode.as_str() {
                "multiclass" => commands::eval::EvalMode::Multiclass,
                "binary" => commands::eval::EvalMode::Binary,
                other => {
                    return Err(dc3do_cli::common::validation(anyhow::anyhow!(
                        "unknown eval mode `{other}` (expected multiclass or binary)"
                    )))
                }
            };
            commands::eval::run(&config.load()?, &checkpoint, mode)
        }
        Command::Render { config, input } => commands::render::run(&config.load()?, &input),
        Command::AblateViews { config } => commands::ablate::run(&config.load()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation { 1 } else { 2 })
        }
    }
}
