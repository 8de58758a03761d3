//! Property predictor on latent vectors and gradient ascent through it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LatentOptError;
use crate::autodiff::{Adam, AdamConfig, Tape, Tensor, Var};

pub const HIDDEN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub valid_fraction: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            epochs: 200,
            batch_size: 50,
            adam: AdamConfig { lr: 3e-3, ..Default::default() },
            valid_fraction: 0.1,
            seed: 0,
        }
    }
}

/// latent → 50 → 50 → 1 with tanh hidden units. Targets are standardized
/// internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPredictor {
    pub weights: Vec<Tensor<f64>>,
    pub y_mean: f64,
    pub y_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub train_rmse: f64,
    pub valid_rmse: Option<f64>,
    pub epochs: usize,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    use rand::Rng;
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor { shape: vec![rows, cols], data: (0..rows * cols).map(|_| rng.random_range(-a..a)).collect() }
}

impl MlpPredictor {
    pub fn init(latent_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = vec![
            glorot(latent_dim, HIDDEN, &mut rng),
            Tensor::zeros(&[HIDDEN]),
            glorot(HIDDEN, HIDDEN, &mut rng),
            Tensor::zeros(&[HIDDEN]),
            Tensor::zeros(&[HIDDEN, 1]),
            Tensor::zeros(&[1]),
        ];
        MlpPredictor { weights, y_mean: 0.0, y_std: 1.0 }
    }

    pub fn latent_dim(&self) -> usize {
        self.weights[0].shape[0]
    }

    /// Standardized outputs `[rows, 1]` plus the parameter leaves.
    fn forward(&self, tape: &mut Tape<f64>, x: Var) -> Result<(Var, Vec<Var>), LatentOptError> {
        let p: Vec<Var> = self.weights.iter().map(|w| tape.leaf(w.clone())).collect();
        let h = tape.dense(x, p[0], p[1])?;
        let h = tape.tanh(h);
        let h = tape.dense(h, p[2], p[3])?;
        let h = tape.tanh(h);
        let out = tape.dense(h, p[4], p[5])?;
        Ok((out, p))
    }

    fn batch_tensor(&self, zs: &[&[f64]]) -> Result<Tensor<f64>, LatentOptError> {
        let d = self.latent_dim();
        if zs.iter().any(|z| z.len() != d) {
            return Err(LatentOptError::DimensionMismatch { expected: d, got: zs.iter().map(|z| z.len()).find(|&l| l != d).unwrap() });
        }
        Ok(Tensor { shape: vec![zs.len(), d], data: zs.concat() })
    }

    pub fn predict_batch(&self, zs: &[&[f64]]) -> Result<Vec<f64>, LatentOptError> {
        let mut tape = Tape::new();
        let x = tape.leaf(self.batch_tensor(zs)?);
        let (out, _) = self.forward(&mut tape, x)?;
        Ok(tape.value(out).data.iter().map(|v| self.y_mean + self.y_std * v).collect())
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64, LatentOptError> {
        Ok(self.predict_batch(&[z])?[0])
    }

    /// Prediction and its gradient with respect to `z`.
    pub fn value_and_gradient(&self, z: &[f64]) -> Result<(f64, Vec<f64>), LatentOptError> {
        let mut tape = Tape::new();
        let x = tape.leaf(self.batch_tensor(&[z])?);
        let (out, _) = self.forward(&mut tape, x)?;
        let w = Tensor::filled(&[1, 1], self.y_std);
        let s = tape.weighted_sum(out, &w)?;
        let g = tape.backward(s)?.get(x);
        Ok((self.y_mean + tape.value(s).item(), g.data))
    }
}

fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    (pred.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / target.len().max(1) as f64).sqrt()
}

/// Trains the predictor by minibatch Adam on mean squared error.
pub fn fit_predictor(
    latents: &[Vec<f64>],
    targets: &[f64],
    config: &PredictorConfig,
) -> Result<(MlpPredictor, PredictorReport), LatentOptError> {
    let n = latents.len();
    if n < 10 || targets.len() != n {
        return Err(LatentOptError::TooFewSamples(n));
    }
    if targets.iter().chain(latents.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(LatentOptError::NonFinite);
    }
    let d = latents[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_valid = ((n as f64 * config.valid_fraction).round() as usize).min(n - 2);
    let (valid_idx, train_idx) = order.split_at(n_valid);
    let mut train_idx = train_idx.to_vec();

    let tm = train_idx.iter().map(|&i| targets[i]).sum::<f64>() / train_idx.len() as f64;
    let tv = train_idx.iter().map(|&i| (targets[i] - tm).powi(2)).sum::<f64>() / train_idx.len() as f64;
    let mut model = MlpPredictor::init(d, config.seed);
    model.y_mean = tm;
    model.y_std = if tv > 0.0 { tv.sqrt() } else { 1.0 };

    let mut adam = Adam::new(config.adam);
    let bs = config.batch_size.max(1);
    let mut step = 0;
    for _ in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(bs) {
            step += 1;
            let zs: Vec<&[f64]> = chunk.iter().map(|&i| latents[i].as_slice()).collect();
            let target = Tensor {
                shape: vec![chunk.len(), 1],
                data: chunk.iter().map(|&i| (targets[i] - model.y_mean) / model.y_std).collect(),
            };
            let mut tape = Tape::new();
            let x = tape.leaf(model.batch_tensor(&zs)?);
            let (out, leaves) = model.forward(&mut tape, x)?;
            let loss = tape.mse(out, &target)?;
            if !tape.value(loss).item().is_finite() {
                return Err(LatentOptError::DivergedLoss { step });
            }
            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor<f64>> = leaves.iter().map(|&v| grads.take(v)).collect();
            let mut params: Vec<&mut Tensor<f64>> = model.weights.iter_mut().collect();
            adam.step(&mut params, &g);
        }
    }
    let eval = |idx: &[usize]| -> Result<f64, LatentOptError> {
        let zs: Vec<&[f64]> = idx.iter().map(|&i| latents[i].as_slice()).collect();
        let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        Ok(rmse(&model.predict_batch(&zs)?, &t))
    };
    let report = PredictorReport {
        train_rmse: eval(&train_idx)?,
        valid_rmse: if valid_idx.is_empty() { None } else { Some(eval(valid_idx)?) },
        epochs: config.epochs,
    };
    Ok((model, report))
}

/// Anything with a value and gradient over latent space.
pub trait Surrogate {
    fn value_and_gradient(&self, z: &[f64]) -> Result<(f64, Vec<f64>), LatentOptError>;
}

impl Surrogate for MlpPredictor {
    fn value_and_gradient(&self, z: &[f64]) -> Result<(f64, Vec<f64>), LatentOptError> {
        MlpPredictor::value_and_gradient(self, z)
    }
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> Surrogate for F {
    fn value_and_gradient(&self, z: &[f64]) -> Result<(f64, Vec<f64>), LatentOptError> {
        Ok(self(z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentConfig {
    pub steps: usize,
    pub step_size: f64,
    /// Halve the step while the predicted value would decrease.
    pub backtracking: bool,
    pub max_halvings: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { steps: 20, step_size: 0.01, backtracking: true, max_halvings: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub z: Vec<f64>,
    pub value: f64,
    pub smiles: Option<String>,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

/// `z ← z + η∇f(z)` for `config.steps` steps, decoding every visited
/// point. The first point is `z0` itself.
pub fn gradient_ascent<S: Surrogate + ?Sized>(
    f: &S,
    z0: &[f64],
    config: &AscentConfig,
    decode: &mut dyn FnMut(&[f64]) -> Result<Option<String>, LatentOptError>,
) -> Result<Trajectory, LatentOptError> {
    if config.steps == 0 {
        return Err(LatentOptError::InvalidArgument("steps must be at least 1".into()));
    }
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(LatentOptError::NonFinite);
    }
    let mut z = z0.to_vec();
    let (mut value, mut grad) = f.value_and_gradient(&z)?;
    let mut eta = config.step_size;
    let mut points = vec![TrajectoryPoint { smiles: decode(&z)?, z: z.clone(), value, step_size: 0.0 }];
    for _ in 0..config.steps {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(LatentOptError::NonFiniteGradient);
        }
        let mut halvings = 0;
        let (cand, cv, cg) = loop {
            let cand: Vec<f64> = z.iter().zip(&grad).map(|(a, g)| a + eta * g).collect();
            let (cv, cg) = f.value_and_gradient(&cand)?;
            if !config.backtracking || cv >= value || halvings >= config.max_halvings {
                break (cand, cv, cg);
            }
            eta *= 0.5;
            halvings += 1;
        };
        if config.backtracking && cv < value {
            // no ascent direction at this resolution
            break;
        }
        z = cand;
        value = cv;
        grad = cg;
        points.push(TrajectoryPoint { smiles: decode(&z)?, z: z.clone(), value, step_size: eta });
    }
    Ok(Trajectory { points })
}
