use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use molvae_cli::config::parse_override;
use molvae_cli::{run, Command, RunConfig};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(name = "molvae", version, about = "SMILES variational autoencoder with latent-space optimization")]
struct Cli {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Config override as key.path=value (value parsed as JSON if possible).
    #[arg(long = "set", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = (|| -> anyhow::Result<()> {
        let mut overrides = Vec::new();
        for s in &cli.set {
            overrides.push(parse_override(s)?);
        }
        let cwd = std::env::current_dir()?;
        for (key, p) in [("corpus", &cli.corpus), ("checkpoint", &cli.checkpoint)] {
            if let Some(p) = p {
                overrides.push((key.to_string(), Value::String(cwd.join(p).display().to_string())));
            }
        }
        let cfg = RunConfig::load(cli.config.as_deref(), &overrides, cli.seed)?;
        let mut stdout = std::io::stdout().lock();
        run(&cli.command, &cfg, &cli.out, &mut stdout)?;
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
