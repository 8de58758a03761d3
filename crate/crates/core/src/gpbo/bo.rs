//! Batch BO loop: refit, select a batch, evaluate, append.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acquisition::{select_batch, SearchConfig};
use super::gp::{FitConfig, SparseGp};
use super::GpError;
use crate::scores::{Objective, ScoreBreakdown};
use crate::smiles::canonicalize;
use crate::vae::{decode_to_valid, VaeError, VaeParams};

/// Observed data plus the fantasies of the batch being selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoState {
    pub z: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub best: f64,
    pub iteration: usize,
    pub fantasies: Vec<Vec<f64>>,
}

impl BoState {
    pub fn new(z: Vec<Vec<f64>>, y: Vec<f64>) -> Self {
        let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        BoState { z, y, best, iteration: 0, fantasies: Vec::new() }
    }

    pub fn observe(&mut self, z: Vec<f64>, y: f64) {
        self.best = self.best.max(y);
        self.z.push(z);
        self.y.push(y);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub inducing: usize,
    pub fit: FitConfig,
    pub search: SearchConfig,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            iterations: 10,
            batch_size: 50,
            inducing: 500,
            fit: FitConfig::default(),
            search: SearchConfig::default(),
            seed: 0,
        }
    }
}

/// Outcome of evaluating one proposed latent point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub smiles: Option<String>,
    /// Objective value; `None` for invalid decodes.
    pub value: Option<f64>,
    pub components: Option<ScoreBreakdown>,
    pub novel: Option<bool>,
}

pub trait Evaluator {
    type Error;
    fn evaluate(&mut self, z: &[f64], seed: u64) -> Result<Evaluation, Self::Error>;
}

/// One line of the history file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub index: usize,
    pub z: Vec<f64>,
    pub smiles: Option<String>,
    pub valid: bool,
    pub components: Option<ScoreBreakdown>,
    pub value: Option<f64>,
    pub best: f64,
    pub novel: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub best: f64,
    pub valid_fraction: f64,
    pub novel: usize,
}

#[derive(Debug, Clone)]
pub struct BoRun {
    pub records: Vec<HistoryRecord>,
    pub summaries: Vec<IterationSummary>,
    pub state: BoState,
}

#[derive(Debug, thiserror::Error)]
pub enum BoError<E: std::fmt::Display> {
    #[error("gp: {0}")]
    Gp(#[from] GpError),
    #[error("evaluator: {0}")]
    Evaluator(E),
}

/// Runs `config.iterations` rounds of fit / select / evaluate starting from
/// the observations in `state`. Invalid evaluations are recorded but never
/// fed to the GP.
pub fn bo_loop<V: Evaluator>(
    mut state: BoState,
    evaluator: &mut V,
    config: &BoConfig,
) -> Result<BoRun, BoError<V::Error>>
where
    V::Error: std::fmt::Display,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for it in 0..config.iterations {
        state.iteration = it;
        let fit_cfg = FitConfig { seed: rng.random(), ..config.fit.clone() };
        let gp = SparseGp::fit(&state.z, &state.y, config.inducing, &fit_cfg)?;
        let batch = select_batch(&gp, &mut state, config.batch_size, &config.search, rng.random());
        state.fantasies.clear();
        let (mut valid, mut novel) = (0, 0);
        for (index, z) in batch.into_iter().enumerate() {
            let ev = evaluator.evaluate(&z, rng.random()).map_err(BoError::Evaluator)?;
            if let Some(v) = ev.value {
                valid += 1;
                state.observe(z.clone(), v);
            }
            if ev.novel == Some(true) {
                novel += 1;
            }
            records.push(HistoryRecord {
                iteration: it,
                index,
                z,
                valid: ev.value.is_some(),
                smiles: ev.smiles,
                components: ev.components,
                value: ev.value,
                best: state.best,
                novel: ev.novel,
            });
        }
        summaries.push(IterationSummary {
            iteration: it,
            best: state.best,
            valid_fraction: valid as f64 / config.batch_size.max(1) as f64,
            novel,
        });
    }
    Ok(BoRun { records, summaries, state })
}

pub fn write_history<W: Write>(mut w: W, records: &[HistoryRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Decodes with the VAE and scores the molecule under an objective.
pub struct VaeEvaluator<'a> {
    pub params: &'a VaeParams,
    pub objective: &'a Objective,
    pub attempts: usize,
    /// Canonical SMILES of the training corpus.
    pub training: &'a HashSet<String>,
}

impl Evaluator for VaeEvaluator<'_> {
    type Error = VaeError;

    fn evaluate(&mut self, z: &[f64], seed: u64) -> Result<Evaluation, VaeError> {
        let zf: Vec<f32> = z.iter().map(|v| *v as f32).collect();
        let Some(dec) = decode_to_valid(self.params, &zf, self.attempts, seed)? else {
            return Ok(Evaluation::default());
        };
        let novel = canonicalize(&dec.graph).ok().map(|c| !self.training.contains(&c));
        match self.objective.score(&dec.graph) {
            Ok(b) => Ok(Evaluation { smiles: Some(dec.smiles), value: Some(b.j), components: Some(b), novel }),
            // e.g. external property missing: recorded without a score
            Err(_) => Ok(Evaluation { smiles: Some(dec.smiles), value: None, components: None, novel }),
        }
    }
}
