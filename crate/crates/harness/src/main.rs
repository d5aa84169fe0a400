use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impute_harness::commands::{self, FixtureKind};
use impute_harness::config::load_config;
use impute_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "spectral-impute", version, about = "Graph-based embedding imputation, GNN training and pruning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML or JSON config file.
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config field, e.g. `--set hyper.hidden=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build an MST-kNN or anchor-kNN graph over a features file.
    BuildGraph(ConfigArgs),
    /// Fill in missing embeddings by diffusion over the feature graph.
    Impute(ConfigArgs),
    /// Train one model and optionally save a checkpoint.
    Train(ConfigArgs),
    /// Sparsify weight tensors.
    Prune(ConfigArgs),
    /// Score an embeddings file.
    Eval(ConfigArgs),
    /// Run a full experiment over split and init seeds.
    Run(ConfigArgs),
    /// Write a synthetic dataset to a directory.
    GenFixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rows written to embeddings.txt (imputation fixtures).
        #[arg(long)]
        known: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::BuildGraph(a) => commands::build_graph(&load_config(&a.config, &a.overrides)?),
        Command::Impute(a) => commands::impute(&load_config(&a.config, &a.overrides)?),
        Command::Train(a) => commands::train(&load_config(&a.config, &a.overrides)?),
        Command::Prune(a) => commands::prune(&load_config(&a.config, &a.overrides)?),
        Command::Eval(a) => commands::eval(&load_config(&a.config, &a.overrides)?),
        Command::Run(a) => commands::run(&load_config(&a.config, &a.overrides)?),
        Command::GenFixture { kind, n, seed, known, out } => commands::gen_fixture(kind, n, seed, known, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    e.exit_code() as u8
}
