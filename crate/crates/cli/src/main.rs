mod commands;
mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Chebyshev ensemble graph networks for supply-chain classification.
#[derive(Debug, Parser)]
#[command(name = "chegn", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set training.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    task: Option<String>,
    #[arg(long, global = true)]
    variant: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate, fit a final model and write the run directory.
    Train,
    /// Score a checkpoint on the configured data.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write the graph or per-layer node embeddings of a checkpoint.
    Export {
        /// `graph` or `embeddings`.
        what: String,
        /// Signal whose embeddings are exported.
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write a synthetic dataset in the loader formats.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(t) = &cli.task {
        overrides.push(format!("task=\"{t}\""));
    }
    if let Some(v) = &cli.variant {
        overrides.push(format!("variant=\"{v}\""));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &cli.output_dir {
        overrides.push(format!("output_dir={}", toml::Value::String(o.display().to_string())));
    }
    RunConfig::load(cli.config.as_deref(), &overrides)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = resolve(cli)?;
    match &cli.command {
        Command::Train => {
            let dir = commands::train(&config)?;
            println!("{}", dir.display());
        }
        Command::Eval { checkpoint } => {
            let dir = commands::eval(&config, checkpoint.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Export {
            what,
            sample,
            checkpoint,
        } => {
            let dir = commands::export(&config, what, *sample, checkpoint.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Synth { out } => {
            commands::synth(&config, out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let diverged = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<chegn::Error>(), Some(chegn::Error::Divergence { .. })));
            ExitCode::from(if diverged { 2 } else { 1 })
        }
    }
}
