//! Command-line layer: configuration, manifests and subcommands.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::Subcommand;
use serde::Serialize;

pub use commands::run;
pub use config::RunConfig;
pub use manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("checkpoint not found: {}", .0.display())]
    CheckpointMissing(PathBuf),
    #[error("no molecules left after filtering")]
    EmptyAfterFiltering,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Clean a SMILES file and build its vocabulary.
    Ingest {
        /// Input file; defaults to the configured corpus.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train a VAE on the configured corpus.
    Train,
    /// Reconstruction accuracy on the train/test split.
    Eval,
    /// Encode a file of SMILES to posterior parameters.
    Encode {
        #[arg(long)]
        input: PathBuf,
    },
    /// Decode latent vectors (one per line) to SMILES.
    Decode {
        #[arg(long)]
        input: PathBuf,
    },
    /// Decode samples from the prior.
    Sample {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Decode random perturbations around a molecule.
    Perturb {
        #[arg(long)]
        smiles: String,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Bilinear grid between four molecules.
    Interpolate {
        /// Four corner molecules, in (0,0) (0,1) (1,0) (1,1) order.
        #[arg(long = "corner", num_args = 1)]
        corners: Vec<String>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Grid along two random orthonormal directions.
    Walk {
        #[arg(long)]
        smiles: String,
    },
    /// Project the corpus with a 2-D model.
    #[command(name = "project2d")]
    Project2d,
    /// Batch Bayesian optimization in latent space.
    OptimizeBo,
    /// Gradient ascent on an MLP property predictor.
    OptimizeGrad {
        /// Starting molecule; the first scored corpus molecule by default.
        #[arg(long)]
        smiles: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Encode { .. } => "encode",
            Command::Decode { .. } => "decode",
            Command::Sample { .. } => "sample",
            Command::Perturb { .. } => "perturb",
            Command::Interpolate { .. } => "interpolate",
            Command::Walk { .. } => "walk",
            Command::Project2d => "project2d",
            Command::OptimizeBo => "optimize-bo",
            Command::OptimizeGrad { .. } => "optimize-grad",
        }
    }
}
