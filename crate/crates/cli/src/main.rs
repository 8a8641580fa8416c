use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqhard_cli::{cmd_eval, cmd_gen, cmd_sweep, cmd_timing, cmd_train, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "eqhard", version, about = "Train and evaluate mixtures of sequence decoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides both the corpus and the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus.
    Gen(Common),
    /// Pretrain the shared network, then run EM over the decoders.
    Train(Common),
    /// Decode the test split and write metric reports.
    Eval(Common),
    /// Compare variants or decoder counts on one corpus.
    Sweep(Common),
    /// Summarize E-step, M-step and Hungarian wall-time shares.
    Timing {
        #[command(flatten)]
        common: Common,
        /// Training log to read instead of the one in the output directory.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    Ok(ExperimentConfig::load(&common.config)?.with_overrides(common.seed, common.out.clone()))
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Gen(c) => cmd_gen(&load(&c)?),
        Command::Train(c) => cmd_train(&load(&c)?),
        Command::Eval(c) => cmd_eval(&load(&c)?),
        Command::Sweep(c) => cmd_sweep(&load(&c)?),
        Command::Timing { common, log } => cmd_timing(&load(&common)?, log.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
