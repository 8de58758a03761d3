//! Expected improvement and Kriging Believer batch selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::bo::BoState;
use super::gp::{prior_samples, SparseGp};

/// EI for maximization given predictive mean and standard deviation.
pub fn ei_from_moments(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= 0.0 || !sigma.is_finite() {
        return 0.0;
    }
    let u = (mu - best) / sigma;
    let cdf = 0.5 * erfc(-u / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    ((mu - best) * cdf + sigma * pdf).max(0.0)
}

pub fn expected_improvement(gp: &SparseGp, z: &[f64], best: f64) -> f64 {
    let (mu, var) = gp.predict(z);
    ei_from_moments(mu, var.sqrt(), best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub starts: usize,
    /// Half-width of the search box in prior standard deviations.
    pub bound: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { starts: 64, bound: 4.0, initial_step: 0.5, min_step: 1e-3, max_sweeps: 40 }
    }
}

/// Coordinate pattern search from one start; returns (point, EI).
fn pattern_search(gp: &SparseGp, start: &[f64], best: f64, cfg: &SearchConfig) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut fx = expected_improvement(gp, &x, best);
    let mut step = cfg.initial_step;
    let mut sweeps = 0;
    while step >= cfg.min_step && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut improved = false;
        for j in 0..x.len() {
            for sign in [1.0, -1.0] {
                let old = x[j];
                x[j] = (old + sign * step).clamp(-cfg.bound, cfg.bound);
                if x[j] == old {
                    continue;
                }
                let f = expected_improvement(gp, &x, best);
                if f > fx {
                    fx = f;
                    improved = true;
                    break;
                }
                x[j] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Runs pattern search from every start. Results keep start order.
fn search_all(gp: &SparseGp, starts: &[Vec<f64>], best: f64, cfg: &SearchConfig) -> Vec<(Vec<f64>, f64)> {
    starts.par_iter().map(|s| pattern_search(gp, s, best, cfg)).collect()
}

/// Highest-EI point over the starts; ties go to the lowest start index.
pub fn maximize_ei(gp: &SparseGp, starts: &[Vec<f64>], best: f64, cfg: &SearchConfig) -> (Vec<f64>, f64) {
    let results = search_all(gp, starts, best, cfg);
    let mut top = 0;
    for (i, r) in results.iter().enumerate() {
        if r.1 > results[top].1 {
            top = i;
        }
    }
    results.into_iter().nth(top).unwrap()
}

fn start_points(state: &BoState, d: usize, cfg: &SearchConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..state.y.len()).collect();
    order.sort_by(|&a, &b| state.y[b].total_cmp(&state.y[a]).then(a.cmp(&b)));
    let from_data = (cfg.starts / 2).min(order.len());
    let mut starts: Vec<Vec<f64>> = order[..from_data]
        .iter()
        .map(|&i| state.z[i].iter().map(|v| v.clamp(-cfg.bound, cfg.bound)).collect())
        .collect();
    starts.extend(prior_samples(cfg.starts - from_data, d, cfg.bound, rng));
    starts
}

/// Selects `batch_size` points by sequential EI maximization, adding each
/// pick as a Kriging Believer fantasy to a private copy of `gp`. The picks
/// are recorded in `state.fantasies`, which is cleared first.
pub fn select_batch(
    gp: &SparseGp,
    state: &mut BoState,
    batch_size: usize,
    cfg: &SearchConfig,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut local = gp.clone();
    let d = gp.dim();
    state.fantasies.clear();
    let mut batch: Vec<Vec<f64>> = Vec::with_capacity(batch_size);
    for k in 0..batch_size {
        let starts = start_points(state, d, cfg, &mut rng);
        let mut results: Vec<(usize, Vec<f64>, f64)> = search_all(&local, &starts, state.best, cfg)
            .into_iter()
            .enumerate()
            .map(|(i, (z, e))| (i, z, e))
            .collect();
        results.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        let distinct = |z: &[f64]| batch.iter().all(|p| p.iter().zip(z).any(|(a, b)| a != b));
        let pick = match results.iter().find(|r| distinct(&r.1)) {
            Some(r) => r.1.clone(),
            None => loop {
                let z = prior_samples(1, d, cfg.bound, &mut rng).pop().unwrap();
                if distinct(&z) {
                    break z;
                }
            },
        };
        if k + 1 < batch_size {
            local.add_fantasy(&pick);
            state.fantasies.push(pick.clone());
        }
        batch.push(pick);
    }
    batch
}
