use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::kernels::{gemm, gru_forward, GruWeights, Mat, MatMut};
use crate::autodiff::{GruVars, Tape, Tensor, Var};

use super::vocab::{EncodedString, Vocabulary};
use super::VaeError;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub max_len: usize,
    pub latent_dim: usize,
    pub conv_filters: Vec<usize>,
    pub conv_widths: Vec<usize>,
    pub encoder_dense: usize,
    pub decoder_dense: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            max_len: 120,
            latent_dim: 56,
            conv_filters: vec![9, 9, 10],
            conv_widths: vec![9, 9, 11],
            encoder_dense: 435,
            decoder_dense: 292,
            gru_hidden: 501,
            gru_layers: 3,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<(), VaeError> {
        let bad = |m: &str| Err(VaeError::Config(m.to_string()));
        if self.conv_filters.len() != self.conv_widths.len() {
            return bad("conv_filters and conv_widths differ in length");
        }
        if self.conv_widths.iter().sum::<usize>() >= self.max_len + self.conv_widths.len() {
            return bad("convolutions leave no output positions");
        }
        if self.gru_layers == 0 || self.latent_dim == 0 || self.max_len == 0 {
            return bad("gru_layers, latent_dim and max_len must be positive");
        }
        if [self.encoder_dense, self.decoder_dense, self.gru_hidden].contains(&0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    fn conv_out_len(&self) -> usize {
        self.conv_widths.iter().fold(self.max_len, |l, w| l + 1 - w)
    }

    fn flat_dim(&self, vocab: usize) -> usize {
        self.conv_out_len() * self.conv_filters.last().copied().unwrap_or(vocab)
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn param_specs(&self, vocab: usize) -> Vec<(String, Vec<usize>)> {
        let mut specs = Vec::new();
        let mut cin = vocab;
        for (i, (&f, &w)) in self.conv_filters.iter().zip(&self.conv_widths).enumerate() {
            specs.push((format!("conv{i}.kernel"), vec![w, cin, f]));
            specs.push((format!("conv{i}.bias"), vec![f]));
            cin = f;
        }
        let d = self.latent_dim;
        let dense = |specs: &mut Vec<_>, name: &str, i: usize, o: usize| {
            specs.push((format!("{name}.weight"), vec![i, o]));
            specs.push((format!("{name}.bias"), vec![o]));
        };
        dense(&mut specs, "encoder_dense", self.flat_dim(vocab), self.encoder_dense);
        dense(&mut specs, "mu", self.encoder_dense, d);
        dense(&mut specs, "logvar", self.encoder_dense, d);
        dense(&mut specs, "decoder_dense", d, self.decoder_dense);
        let h = self.gru_hidden;
        for l in 0..self.gru_layers {
            let mut input = if l == 0 { self.decoder_dense } else { h };
            if l + 1 == self.gru_layers {
                input += vocab;
            }
            specs.push((format!("gru{l}.wx"), vec![input, 3 * h]));
            specs.push((format!("gru{l}.uzr"), vec![h, 2 * h]));
            specs.push((format!("gru{l}.uh"), vec![h, h]));
            specs.push((format!("gru{l}.bias"), vec![3 * h]));
        }
        dense(&mut specs, "output", h, vocab);
        specs
    }
}

/// Trained (or initialized) network weights plus the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    pub config: VaeConfig,
    pub vocab: Vocabulary,
    pub tensors: Vec<Tensor<f32>>,
}

/// Parameters as tape variables, grouped by layer.
pub(crate) struct ParamVars {
    pub all: Vec<Var>,
    convs: Vec<(Var, Var)>,
    encoder: (Var, Var),
    mu: (Var, Var),
    logvar: (Var, Var),
    decoder: (Var, Var),
    grus: Vec<GruVars>,
    output: (Var, Var),
}

/// Tape-free views of the decoder weights.
struct DecoderRefs<'a> {
    dense: (&'a [f32], &'a [f32]),
    grus: Vec<GruWeights<'a, f32>>,
    output: (&'a [f32], &'a [f32]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DecodeMode {
    Greedy,
    Stochastic { temperature: f64 },
}

/// Posterior parameters from the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDistribution {
    pub mu: Vec<f32>,
    pub logvar: Vec<f32>,
}

/// A decoded string and the distribution used at each emitted position.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub smiles: String,
    pub probabilities: Vec<Vec<f32>>,
}

impl VaeParams {
    /// Glorot-uniform weights and zero biases.
    pub fn init(config: VaeConfig, vocab: Vocabulary, seed: u64) -> Result<Self, VaeError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = config
            .param_specs(vocab.len())
            .into_iter()
            .map(|(name, shape)| {
                if name.ends_with("bias") {
                    return Tensor::zeros(&shape);
                }
                let (fan_in, fan_out) = match shape.as_slice() {
                    [w, cin, cout] => (w * cin, w * cout),
                    [i, o] => (*i, *o),
                    _ => unreachable!("weights are 2-d or 3-d"),
                };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n = shape.iter().product();
                let data = (0..n).map(|_| rng.random_range(-limit..limit) as f32).collect();
                Tensor { shape, data }
            })
            .collect();
        Ok(VaeParams { config, vocab, tensors })
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeros(config: VaeConfig, vocab: Vocabulary) -> Result<Self, VaeError> {
        config.validate()?;
        let tensors = config.param_specs(vocab.len()).into_iter().map(|(_, s)| Tensor::zeros(&s)).collect();
        Ok(VaeParams { config, vocab, tensors })
    }

    pub fn names(&self) -> Vec<String> {
        self.config.param_specs(self.vocab.len()).into_iter().map(|(n, _)| n).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub(crate) fn load(&self, tape: &mut Tape<f32>) -> ParamVars {
        let all: Vec<Var> = self.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let mut it = all.iter().copied();
        let mut pair = || (it.next().unwrap(), it.next().unwrap());
        let convs = (0..self.config.conv_filters.len()).map(|_| pair()).collect();
        let encoder = pair();
        let mu = pair();
        let logvar = pair();
        let decoder = pair();
        let grus = (0..self.config.gru_layers)
            .map(|_| {
                let (wx, uzr) = pair();
                let (uh, b) = pair();
                GruVars { wx, uzr, uh, b }
            })
            .collect();
        let output = pair();
        ParamVars { all, convs, encoder, mu, logvar, decoder, grus, output }
    }

    fn decoder_refs(&self) -> DecoderRefs<'_> {
        let t = &self.tensors;
        let base = 2 * self.config.conv_filters.len() + 6;
        let h = self.config.gru_hidden;
        let grus = (0..self.config.gru_layers)
            .map(|l| {
                let k = base + 2 + 4 * l;
                GruWeights {
                    wx: &t[k].data,
                    uzr: &t[k + 1].data,
                    uh: &t[k + 2].data,
                    b: &t[k + 3].data,
                    input: t[k].shape[0],
                    hidden: h,
                }
            })
            .collect();
        let o = base + 2 + 4 * self.config.gru_layers;
        DecoderRefs {
            dense: (&t[base].data, &t[base + 1].data),
            grus,
            output: (&t[o].data, &t[o + 1].data),
        }
    }

    /// Encoder on the tape: one-hot batch `[n, max_len, vocab]` → (mu, logvar).
    pub(crate) fn encoder(&self, tape: &mut Tape<f32>, pv: &ParamVars, x: Var) -> Result<(Var, Var), VaeError> {
        let mut h = x;
        for &(k, b) in &pv.convs {
            let c = tape.conv1d(h, k, b)?;
            h = tape.tanh(c);
        }
        let n = tape.value(x).shape[0];
        let flat = tape.reshape(h, &[n, self.config.flat_dim(self.vocab.len())])?;
        let d = tape.dense(flat, pv.encoder.0, pv.encoder.1)?;
        let d = tape.tanh(d);
        let mu = tape.dense(d, pv.mu.0, pv.mu.1)?;
        let logvar = tape.dense(d, pv.logvar.0, pv.logvar.1)?;
        Ok((mu, logvar))
    }

    /// Teacher-forced decoder on the tape: latent `[n, d]` and the previous
    /// characters as one-hot `[n, max_len, vocab]` → logits `[n, max_len, vocab]`.
    pub(crate) fn decoder(&self, tape: &mut Tape<f32>, pv: &ParamVars, z: Var, prev: Var) -> Result<Var, VaeError> {
        let n = tape.value(z).shape[0];
        let d = tape.dense(z, pv.decoder.0, pv.decoder.1)?;
        let d = tape.tanh(d);
        let mut h = tape.repeat(d, self.config.max_len)?;
        let h0 = tape.leaf(Tensor::zeros(&[n, self.config.gru_hidden]));
        let last = pv.grus.len() - 1;
        for (l, g) in pv.grus.iter().enumerate() {
            if l == last {
                h = tape.concat(h, prev)?;
            }
            h = tape.gru(h, h0, *g)?;
        }
        Ok(tape.dense(h, pv.output.0, pv.output.1)?)
    }

    fn one_hot_batch(&self, batch: &[&EncodedString]) -> (Tensor<f32>, Tensor<f32>) {
        let (l, v) = (self.config.max_len, self.vocab.len());
        let mut x = Vec::with_capacity(batch.len() * l * v);
        let mut prev = Vec::with_capacity(batch.len() * l * v);
        for e in batch {
            x.extend(e.one_hot(v));
            prev.extend(e.shifted_one_hot(v));
        }
        (
            Tensor { shape: vec![batch.len(), l, v], data: x },
            Tensor { shape: vec![batch.len(), l, v], data: prev },
        )
    }

    pub(crate) fn batch_inputs(&self, tape: &mut Tape<f32>, batch: &[&EncodedString]) -> (Var, Var) {
        let (x, prev) = self.one_hot_batch(batch);
        (tape.leaf(x), tape.leaf(prev))
    }

    pub fn encode_str(&self, s: &str) -> Result<EncodedString, VaeError> {
        self.vocab.encode(s, self.config.max_len)
    }

    /// Posterior parameters for each string.
    pub fn encode_batch(&self, batch: &[&EncodedString]) -> Result<Vec<LatentDistribution>, VaeError> {
        let mut tape = Tape::new();
        let pv = self.load_encoder(&mut tape);
        let (x, _) = self.batch_inputs(&mut tape, batch);
        let (mu, lv) = self.encoder(&mut tape, &pv, x)?;
        let d = self.config.latent_dim;
        Ok(tape
            .value(mu)
            .data
            .chunks_exact(d)
            .zip(tape.value(lv).data.chunks_exact(d))
            .map(|(m, l)| LatentDistribution { mu: m.to_vec(), logvar: l.to_vec() })
            .collect())
    }

    /// Like [`load`](Self::load) but only the encoder tensors are copied.
    fn load_encoder(&self, tape: &mut Tape<f32>) -> ParamVars {
        let n_enc = 2 * self.config.conv_filters.len() + 6;
        let mut all = Vec::with_capacity(self.tensors.len());
        for (i, t) in self.tensors.iter().enumerate() {
            all.push(if i < n_enc { tape.leaf(t.clone()) } else { tape.leaf(Tensor::zeros(&[0])) });
        }
        let mut it = all.iter().copied();
        let mut pair = || (it.next().unwrap(), it.next().unwrap());
        let convs = (0..self.config.conv_filters.len()).map(|_| pair()).collect();
        let (encoder, mu, logvar) = (pair(), pair(), pair());
        let dummy = (encoder.0, encoder.0);
        ParamVars { all, convs, encoder, mu, logvar, decoder: dummy, grus: Vec::new(), output: dummy }
    }

    pub fn encode(&self, s: &str) -> Result<LatentDistribution, VaeError> {
        let e = self.encode_str(s)?;
        Ok(self.encode_batch(&[&e])?.remove(0))
    }

    /// Teacher-forced logits `[n, max_len, vocab]` for a batch.
    pub fn teacher_forced_logits(&self, batch: &[&EncodedString], z: &[Vec<f32>]) -> Result<Vec<f32>, VaeError> {
        let mut tape = Tape::new();
        let pv = self.load(&mut tape);
        let (_, prev) = self.batch_inputs(&mut tape, batch);
        let zt = tape.leaf(latent_tensor(z, self.config.latent_dim)?);
        let logits = self.decoder(&mut tape, &pv, zt, prev)?;
        Ok(tape.value(logits).data.clone())
    }

    /// Autoregressive decoding of a batch of latent points. Row `i` draws
    /// from a generator seeded with `seeds[i]` (ignored in greedy mode).
    pub fn decode_batch(&self, z: &[Vec<f32>], mode: DecodeMode, seeds: &[u64]) -> Result<Vec<Decoded>, VaeError> {
        let n = z.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        if let DecodeMode::Stochastic { temperature } = mode {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(VaeError::Config(format!("temperature must be positive, got {temperature}")));
            }
            if seeds.len() != n {
                return Err(VaeError::Config("one seed per latent point".into()));
            }
        }
        let zt = latent_tensor(z, self.config.latent_dim)?;
        let cfg = &self.config;
        let (steps, v, hd) = (cfg.max_len, self.vocab.len(), cfg.gru_hidden);
        let w = self.decoder_refs();

        let mut dense = Vec::with_capacity(n * cfg.decoder_dense);
        for _ in 0..n {
            dense.extend_from_slice(w.dense.1);
        }
        gemm(1.0, Mat::new(&zt.data, n, cfg.latent_dim), Mat::new(w.dense.0, cfg.latent_dim, cfg.decoder_dense), 1.0, MatMut::new(&mut dense, n, cfg.decoder_dense));
        dense.iter_mut().for_each(|x| *x = x.tanh());
        let mut seq = Vec::with_capacity(n * steps * cfg.decoder_dense);
        for row in dense.chunks_exact(cfg.decoder_dense) {
            for _ in 0..steps {
                seq.extend_from_slice(row);
            }
        }
        // layers below the last do not see emitted characters
        let zeros = vec![0.0f32; n * hd];
        let last = w.grus.len() - 1;
        for g in &w.grus[..last] {
            seq = gru_forward(*g, &seq, &zeros, n, steps).0;
        }

        let mut rngs: Vec<ChaCha8Rng> = match mode {
            DecodeMode::Greedy => Vec::new(),
            DecodeMode::Stochastic { .. } => seeds.iter().map(|&s| ChaCha8Rng::seed_from_u64(s)).collect(),
        };
        let mut h = zeros.clone();
        let mut prev = vec![0usize; n];
        let mut done = vec![false; n];
        let mut out: Vec<Decoded> = (0..n).map(|_| Decoded { smiles: String::new(), probabilities: Vec::new() }).collect();
        let mut input = vec![0.0f32; n * (hd + v)];
        let mut logits = vec![0.0f32; n * v];
        for t in 0..steps {
            if done.iter().all(|&d| d) {
                break;
            }
            for i in 0..n {
                let row = &mut input[i * (hd + v)..(i + 1) * (hd + v)];
                row[..hd].copy_from_slice(&seq[(i * steps + t) * hd..(i * steps + t + 1) * hd]);
                row[hd..].iter_mut().for_each(|x| *x = 0.0);
                row[hd + prev[i]] = 1.0;
            }
            h = gru_forward(w.grus[last], &input, &h, n, 1).0;
            for row in logits.chunks_exact_mut(v) {
                row.copy_from_slice(w.output.1);
            }
            gemm(1.0, Mat::new(&h, n, hd), Mat::new(w.output.0, hd, v), 1.0, MatMut::new(&mut logits, n, v));
            for i in 0..n {
                if done[i] {
                    continue;
                }
                let row = &logits[i * v..(i + 1) * v];
                let (probs, choice) = match mode {
                    DecodeMode::Greedy => {
                        let p = softmax(row, 1.0);
                        let best = argmax(row);
                        (p, best)
                    }
                    DecodeMode::Stochastic { temperature } => {
                        let p = softmax(row, temperature);
                        let c = sample(&p, &mut rngs[i]);
                        (p, c)
                    }
                };
                out[i].probabilities.push(probs);
                if choice == 0 {
                    done[i] = true;
                } else {
                    out[i].smiles.push(self.vocab.char_at(choice));
                }
                prev[i] = choice;
            }
        }
        Ok(out)
    }

    pub fn decode(&self, z: &[f32], mode: DecodeMode, seed: u64) -> Result<Decoded, VaeError> {
        Ok(self.decode_batch(&[z.to_vec()], mode, &[seed])?.remove(0))
    }
}

pub(crate) fn latent_tensor(z: &[Vec<f32>], d: usize) -> Result<Tensor<f32>, VaeError> {
    let mut data = Vec::with_capacity(z.len() * d);
    for row in z {
        if row.len() != d {
            return Err(VaeError::LatentDim { expected: d, got: row.len() });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(VaeError::Config("latent point has non-finite entries".into()));
        }
        data.extend_from_slice(row);
    }
    Ok(Tensor { shape: vec![z.len(), d], data })
}

/// First index of the maximum.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn softmax(row: &[f32], temperature: f64) -> Vec<f32> {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let e: Vec<f64> = row.iter().map(|&x| ((x as f64 - max) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| (x / s) as f32).collect()
}

fn sample(p: &[f32], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi as f64;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the cumulative sum
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}
