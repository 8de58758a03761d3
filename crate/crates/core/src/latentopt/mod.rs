//! Latent-space exploration and local optimization.

mod explore;
mod mlp;

pub use explore::{
    decode_points, default_perturbation_scale, distinct_molecules, interpolate_grid, perturb, project_2d,
    random_walk_2d, GridCell, Histogram, Projection, WalkGrid,
};
pub use mlp::{
    fit_predictor, gradient_ascent, AscentConfig, MlpPredictor, PredictorConfig, PredictorReport, Surrogate,
    Trajectory, TrajectoryPoint, HIDDEN,
};

use crate::autodiff::AutodiffError;
use crate::vae::VaeError;

#[derive(Debug, thiserror::Error)]
pub enum LatentOptError {
    #[error("need at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite input")]
    NonFinite,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("loss diverged at step {step}")]
    DivergedLoss { step: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Vae(#[from] VaeError),
}
