use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{partitioned_sum, Adam, AdamConfig, Tape, Tensor};
use crate::smiles::{parse_smiles, validate, MolGraph};

use super::model::{argmax, latent_tensor, DecodeMode, VaeParams};
use super::vocab::EncodedString;
use super::VaeError;

/// Optimization settings. Defaults are desk-scale choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Largest KL weight; 0 trains a plain autoencoder objective.
    pub kl_weight: f64,
    /// Fraction of all steps over which the KL weight ramps up linearly.
    pub kl_anneal_fraction: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    /// Strings used for the per-epoch accuracy; 0 means the whole corpus.
    pub eval_subset: usize,
    /// Prior samples decoded per epoch for the valid fraction; 0 skips it.
    pub valid_samples: usize,
    /// Stop once an epoch's teacher-forced accuracy reaches this percentage.
    pub target_accuracy: Option<f64>,
    /// Stop after the first epoch that ends past this wall-clock budget.
    pub max_seconds: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            kl_weight: 1.0,
            kl_anneal_fraction: 0.2,
            clip_norm: Some(5.0),
            seed: 0,
            workers: 1,
            eval_subset: 500,
            valid_samples: 0,
            target_accuracy: None,
            max_seconds: None,
        }
    }
}

impl TrainConfig {
    /// KL weight at `step` (0-based) of `total` steps.
    pub fn kl_weight_at(&self, step: usize, total: usize) -> f64 {
        let ramp = self.kl_anneal_fraction * total as f64;
        if ramp <= 0.0 {
            return self.kl_weight;
        }
        self.kl_weight * (step as f64 / ramp).min(1.0)
    }
}

/// Loss components of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub reconstruction: f64,
    pub kl: f64,
    pub kl_weight: f64,
    pub total: f64,
}

/// One JSON-lines record per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: usize,
    pub reconstruction_loss: f64,
    pub kl: f64,
    pub kl_weight: f64,
    pub total_loss: f64,
    pub accuracy: f64,
    /// Same metric restricted to positions holding a character.
    #[serde(default)]
    pub content_accuracy: Option<f64>,
    pub valid_fraction: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: VaeParams,
    pub steps: Vec<StepMetrics>,
    pub epochs: Vec<EpochMetrics>,
}

/// Loss pieces and gradients for one batch, each molecule weighted by
/// `1/batch_total` so that chunk results add up to batch means.
fn chunk_grads(
    params: &VaeParams,
    items: &[(&EncodedString, Vec<f32>)],
    batch_total: usize,
    kl_weight: f64,
) -> Result<(Vec<f64>, Vec<Tensor<f32>>), VaeError> {
    let mut tape = Tape::new();
    let pv = params.load(&mut tape);
    let batch: Vec<&EncodedString> = items.iter().map(|(e, _)| *e).collect();
    let (x, prev) = params.batch_inputs(&mut tape, &batch);
    let (mu, lv) = params.encoder(&mut tape, &pv, x)?;
    let eps = latent_tensor(&items.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>(), params.latent_dim())?;
    let z = tape.gauss_sample(mu, lv, &eps)?;
    let logits = params.decoder(&mut tape, &pv, z, prev)?;
    let targets: Vec<usize> = batch.iter().flat_map(|e| e.indices.iter().copied()).collect();
    let xent = tape.softmax_xent(logits, &targets)?;
    let share = items.len() as f32 / batch_total as f32;
    // summed over positions, averaged over molecules
    let recon = tape.scale(xent, params.config.max_len as f32 * share);
    let kl_mean = tape.kl_std_normal(mu, lv)?;
    let kl = tape.scale(kl_mean, share);
    let weighted = tape.scale(kl, kl_weight as f32);
    let total = tape.add(recon, weighted)?;
    let mut grads = tape.backward(total)?;
    let g = pv.all.iter().map(|&v| grads.take(v)).collect();
    let val = |v| tape.value(v).item() as f64;
    Ok((vec![val(total), val(recon), val(kl)], g))
}

/// Minibatch training with teacher forcing and KL annealing. Starts from
/// `init` when given, otherwise from a fresh initialization seeded by
/// `config.seed`.
pub fn train(
    corpus: &[EncodedString],
    init: VaeParams,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome, VaeError> {
    if corpus.is_empty() {
        return Err(VaeError::EmptyCorpus);
    }
    let mut params = init;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.adam);
    let batch_size = config.batch_size.max(1);
    let per_epoch = corpus.len().div_ceil(batch_size);
    let total_steps = per_epoch * config.epochs;
    let d = params.latent_dim();
    let start = Instant::now();
    let mut steps = Vec::with_capacity(total_steps);
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 3];
        let mut weight = 0.0;
        for idx in order.chunks(batch_size) {
            weight = config.kl_weight_at(step, total_steps);
            let items: Vec<(&EncodedString, Vec<f32>)> = idx
                .iter()
                .map(|&i| {
                    let eps: Vec<f32> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    (&corpus[i], eps)
                })
                .collect();
            let (loss, mut grads) = partitioned_sum(config.workers, &items, |chunk| {
                chunk_grads(&params, chunk, items.len(), weight)
            })?;
            if !loss.iter().all(|l| l.is_finite()) {
                return Err(VaeError::DivergedLoss { step });
            }
            if let Some(max_norm) = config.clip_norm {
                clip(&mut grads, max_norm);
            }
            let mut refs: Vec<&mut Tensor<f32>> = params.tensors.iter_mut().collect();
            adam.step(&mut refs, &grads);
            steps.push(StepMetrics {
                step,
                reconstruction: loss[1],
                kl: loss[2],
                kl_weight: weight,
                total: loss[0],
            });
            for (s, l) in sums.iter_mut().zip(&loss) {
                *s += l * idx.len() as f64;
            }
            step += 1;
        }
        let n = corpus.len() as f64;
        let eval: Vec<&EncodedString> = if config.eval_subset == 0 || config.eval_subset >= corpus.len() {
            corpus.iter().collect()
        } else {
            corpus.iter().take(config.eval_subset).collect()
        };
        let (accuracy, content_accuracy) = accuracies(&eval, &params)?;
        let valid_fraction = if config.valid_samples > 0 {
            Some(valid_fraction(&params, config.valid_samples, config.seed ^ epoch as u64)?)
        } else {
            None
        };
        let m = EpochMetrics {
            epoch,
            steps: step,
            reconstruction_loss: sums[1] / n,
            kl: sums[2] / n,
            kl_weight: weight,
            total_loss: sums[0] / n,
            accuracy,
            content_accuracy: Some(content_accuracy),
            valid_fraction,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&m);
        let reached = config.target_accuracy.is_some_and(|t| m.accuracy >= t);
        let out_of_time = config.max_seconds.is_some_and(|s| m.seconds >= s);
        epochs.push(m);
        if reached || out_of_time {
            break;
        }
    }
    Ok(TrainOutcome { params, steps, epochs })
}

fn clip(grads: &mut [Tensor<f32>], max_norm: f64) {
    let norm: f64 = grads
        .iter()
        .flat_map(|g| g.data.iter())
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        grads.iter_mut().flat_map(|g| g.data.iter_mut()).for_each(|x| *x *= s);
    }
}

const EVAL_BATCH: usize = 32;

/// Teacher-forced (all positions, character positions) accuracy in
/// percent, decoding from the posterior mean.
fn accuracies(corpus: &[&EncodedString], params: &VaeParams) -> Result<(f64, f64), VaeError> {
    if corpus.is_empty() {
        return Err(VaeError::EmptyCorpus);
    }
    let v = params.vocab.len();
    let (mut all, mut content, mut chars) = (0usize, 0usize, 0usize);
    for batch in corpus.chunks(EVAL_BATCH) {
        let mu: Vec<Vec<f32>> = params.encode_batch(batch)?.into_iter().map(|d| d.mu).collect();
        let logits = params.teacher_forced_logits(batch, &mu)?;
        let mut rows = logits.chunks_exact(v);
        for e in batch {
            chars += e.length;
            for (t, (&target, row)) in e.indices.iter().zip(rows.by_ref()).enumerate() {
                if argmax(row) == target {
                    all += 1;
                    if t < e.length {
                        content += 1;
                    }
                }
            }
        }
    }
    let positions = corpus.len() * params.config.max_len;
    Ok((100.0 * all as f64 / positions as f64, 100.0 * content as f64 / chars.max(1) as f64))
}

/// Percentage of the `max_len` padded positions where the teacher-forced
/// argmax matches the string, decoding from the posterior mean; averaged
/// over strings.
pub fn reconstruction_accuracy(corpus: &[&EncodedString], params: &VaeParams) -> Result<f64, VaeError> {
    Ok(accuracies(corpus, params)?.0)
}

/// Teacher-forced accuracy over character positions only; padding is
/// excluded.
pub fn content_accuracy(corpus: &[&EncodedString], params: &VaeParams) -> Result<f64, VaeError> {
    Ok(accuracies(corpus, params)?.1)
}

/// Same positions, but the decoder feeds back its own greedy output.
pub fn free_running_accuracy(corpus: &[&EncodedString], params: &VaeParams) -> Result<f64, VaeError> {
    if corpus.is_empty() {
        return Err(VaeError::EmptyCorpus);
    }
    let max_len = params.config.max_len;
    let mut correct = 0usize;
    for batch in corpus.chunks(EVAL_BATCH) {
        let mu: Vec<Vec<f32>> = params.encode_batch(batch)?.into_iter().map(|d| d.mu).collect();
        let decoded = params.decode_batch(&mu, DecodeMode::Greedy, &[])?;
        for (e, d) in batch.iter().zip(decoded) {
            let got = params.vocab.encode(&d.smiles, max_len)?;
            correct += got.indices.iter().zip(&e.indices).filter(|(a, b)| a == b).count();
        }
    }
    Ok(100.0 * correct as f64 / (corpus.len() * max_len) as f64)
}

pub(crate) fn is_valid_smiles(s: &str) -> Option<MolGraph> {
    let g = parse_smiles(s).ok()?;
    validate(&g).valid.then_some(g)
}

/// Fraction of `n` prior samples whose single stochastic decode validates.
pub fn valid_fraction(params: &VaeParams, n: usize, seed: u64) -> Result<f64, VaeError> {
    if n == 0 {
        return Err(VaeError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.latent_dim();
    let z: Vec<Vec<f32>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let seeds: Vec<u64> = (0..n as u64).map(|i| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i)).collect();
    let mut valid = 0;
    for (zc, sc) in z.chunks(EVAL_BATCH).zip(seeds.chunks(EVAL_BATCH)) {
        for d in params.decode_batch(zc, DecodeMode::Stochastic { temperature: 1.0 }, sc)? {
            if is_valid_smiles(&d.smiles).is_some() {
                valid += 1;
            }
        }
    }
    Ok(valid as f64 / n as f64)
}

/// A validated decode and how far its re-encoding lands from the target.
#[derive(Debug, Clone)]
pub struct ValidDecode {
    pub smiles: String,
    pub graph: MolGraph,
    pub distance: f64,
}

/// Every stochastic decode of `z` over `attempts` seeds, in attempt order.
pub fn decode_attempts(params: &VaeParams, z: &[f32], attempts: usize, seed: u64, temperature: f64) -> Result<Vec<String>, VaeError> {
    let zs = vec![z.to_vec(); attempts];
    let seeds: Vec<u64> = (0..attempts as u64).map(|k| seed.wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03))).collect();
    let mut out = Vec::with_capacity(attempts);
    for (zc, sc) in zs.chunks(EVAL_BATCH).zip(seeds.chunks(EVAL_BATCH)) {
        out.extend(params.decode_batch(zc, DecodeMode::Stochastic { temperature }, sc)?.into_iter().map(|d| d.smiles));
    }
    Ok(out)
}

/// Euclidean distance between each string's posterior mean and `z`.
pub fn reencode_distances(params: &VaeParams, smiles: &[&str], z: &[f32]) -> Result<Vec<f64>, VaeError> {
    let enc: Vec<EncodedString> = smiles.iter().map(|s| params.encode_str(s)).collect::<Result<_, _>>()?;
    let refs: Vec<&EncodedString> = enc.iter().collect();
    let mut out = Vec::with_capacity(refs.len());
    for batch in refs.chunks(EVAL_BATCH) {
        for d in params.encode_batch(batch)? {
            let dist = d.mu.iter().zip(z).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt();
            out.push(dist);
        }
    }
    Ok(out)
}

/// Decodes `attempts` times, keeps the valid molecules, and returns the one
/// whose re-encoded mean lies closest to `z` (earliest attempt on ties).
pub fn decode_to_valid(params: &VaeParams, z: &[f32], attempts: usize, seed: u64) -> Result<Option<ValidDecode>, VaeError> {
    if attempts == 0 {
        return Err(VaeError::Config("attempts must be at least 1".into()));
    }
    let candidates: Vec<(String, MolGraph)> = decode_attempts(params, z, attempts, seed, 1.0)?
        .into_iter()
        .filter_map(|s| is_valid_smiles(&s).map(|g| (s, g)))
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let strs: Vec<&str> = candidates.iter().map(|(s, _)| s.as_str()).collect();
    let dist = reencode_distances(params, &strs, z)?;
    let mut best = 0;
    for i in 1..dist.len() {
        if dist[i] < dist[best] {
            best = i;
        }
    }
    let (smiles, graph) = candidates.into_iter().nth(best).unwrap();
    Ok(Some(ValidDecode { smiles, graph, distance: dist[best] }))
}
