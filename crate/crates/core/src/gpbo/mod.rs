//! Sparse GP surrogate and batch Bayesian optimization over latent space.

mod acquisition;
mod bo;
mod gp;

pub use acquisition::{expected_improvement, ei_from_moments, maximize_ei, select_batch, SearchConfig};
pub use bo::{
    bo_loop, write_history, VaeEvaluator, BoConfig, BoError, BoRun, BoState, Evaluation, Evaluator,
    HistoryRecord, IterationSummary,
};
pub use gp::{fitc_nlml, kmeans_pp, FitConfig, Hyperparameters, NoiseMode, SparseGp, JITTER};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("kernel matrix is singular even with maximal jitter")]
    SingularKernel,
    #[error("non-finite value in GP inputs")]
    NonFiniteInput,
    #[error("need at least 2 training points, got {0}")]
    TooFewPoints(usize),
    #[error("inconsistent input dimensions")]
    DimensionMismatch,
}
