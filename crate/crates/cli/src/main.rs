mod backend;
mod config;
mod error;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use config::RunConfig;
use error::CliResult;
use stages::eval::{EvalArgs, EvalMode};

#[derive(Parser)]
#[command(name = "povsent", version, about = "Point-of-view sentiment analysis of clinical note sentences")]
struct Cli {
    /// Run config (TOML), or a run manifest to repeat its configuration.
    #[arg(long, global = true, default_value = "povsent.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate annotations, compute kappas and agreement tables.
    Agreement,
    /// Build the agreement datasets and their train/validation splits.
    StratifySplit,
    /// Score every in-context example combination on a dataset's validation split.
    Search {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        pov: String,
        /// Use the offline mock instead of the configured endpoint.
        #[arg(long)]
        mock: bool,
    },
    /// Score a prompt mode, or imported predictions, on a dataset or the test set.
    Eval {
        /// Dataset name, or `test` for the external test set.
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        pov: String,
        #[arg(long, value_enum)]
        mode: EvalMode,
        #[arg(long)]
        mock: bool,
        /// Dataset whose searched prompt is used (best-icl on the test set).
        #[arg(long)]
        prompt_from: Option<String>,
        /// CSV of `sentence_id,label` (import mode).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Source tag for imported predictions; defaults to the file stem.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Collect evaluation and search outputs into summary tables.
    Report,
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(&cli.config)?;
    match cli.command {
        Command::Agreement => stages::agreement::run(&cfg),
        Command::StratifySplit => stages::stratify::run(&cfg),
        Command::Search { dataset, pov, mock } => stages::search::run(&cfg, &dataset, stages::parse_pov(&pov)?, mock),
        Command::Eval {
            dataset,
            pov,
            mode,
            mock,
            prompt_from,
            predictions,
            tag,
        } => stages::eval::run(
            &cfg,
            &EvalArgs {
                target: &dataset,
                pov: stages::parse_pov(&pov)?,
                mode,
                mock,
                prompt_from: prompt_from.as_deref(),
                predictions: predictions.as_deref(),
                tag: tag.as_deref(),
            },
        ),
        Command::Report => stages::report::run(&cfg),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("POVSENT_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
