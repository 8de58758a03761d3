//! Perturbation, bilinear grids, random 2-D walks and 2-D projections.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LatentOptError;
use crate::smiles::canonicalize;
use crate::vae::{decode_to_valid, LatentDistribution, VaeParams};

/// `n` points `z + scale·ε`.
pub fn perturb(z: &[f64], scale: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, LatentOptError> {
    if !(scale >= 0.0) {
        return Err(LatentOptError::InvalidArgument(format!("scale must be non-negative, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| z.iter().map(|v| v + scale * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect())
}

/// Half the mean posterior standard deviation over a set of encodings.
pub fn default_perturbation_scale(posteriors: &[LatentDistribution]) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for p in posteriors {
        for lv in &p.logvar {
            s += (0.5 * *lv as f64).exp();
            k += 1;
        }
    }
    if k == 0 { 0.0 } else { 0.5 * s / k as f64 }
}

/// Decodes every point with `decode_to_valid`, cell `i` using `seed + i`.
pub fn decode_points(
    params: &VaeParams,
    points: &[Vec<f64>],
    attempts: usize,
    seed: u64,
) -> Result<Vec<Option<String>>, LatentOptError> {
    points
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let zf: Vec<f32> = z.iter().map(|v| *v as f32).collect();
            Ok(decode_to_valid(params, &zf, attempts, seed.wrapping_add(i as u64))?.map(|d| d.smiles))
        })
        .collect()
}

/// Distinct molecules by canonical SMILES, in first-seen order.
pub fn distinct_molecules(decoded: &[Option<String>]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in decoded.iter().flatten() {
        let key = crate::smiles::parse_valid(s).and_then(|g| canonicalize(&g).ok()).unwrap_or_else(|| s.clone());
        if seen.insert(key.clone()) {
            out.push(key);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    /// Interpolation parameters in [0, 1].
    pub a: f64,
    pub b: f64,
    pub z: Vec<f64>,
}

/// Bilinear grid over corners at parameters (0,0), (0,1), (1,0), (1,1),
/// row-major with `resolution` cells per side.
pub fn interpolate_grid(corners: &[Vec<f64>; 4], resolution: usize) -> Result<Vec<GridCell>, LatentOptError> {
    if resolution < 2 {
        return Err(LatentOptError::InvalidArgument("resolution must be at least 2".into()));
    }
    let d = corners[0].len();
    if let Some(c) = corners.iter().find(|c| c.len() != d) {
        return Err(LatentOptError::DimensionMismatch { expected: d, got: c.len() });
    }
    let r = (resolution - 1) as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        for col in 0..resolution {
            let (a, b) = (row as f64 / r, col as f64 / r);
            let w = [(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b];
            let z = (0..d).map(|k| (0..4).map(|c| w[c] * corners[c][k]).sum()).collect();
            cells.push(GridCell { row, col, a, b, z });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkGrid {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub displacements: Vec<f64>,
    /// `cells[i][j] = z0 + displacements[i]·u + displacements[j]·v`.
    pub cells: Vec<Vec<Vec<f64>>>,
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= n);
    n
}

/// Two random orthonormal directions through `z0` sampled on a grid of
/// displacements.
pub fn random_walk_2d(z0: &[f64], displacements: &[f64], seed: u64) -> Result<WalkGrid, LatentOptError> {
    if displacements.is_empty() {
        return Err(LatentOptError::InvalidArgument("displacements must be non-empty".into()));
    }
    let mut sorted = displacements.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut neg: Vec<f64> = sorted.iter().map(|v| -v).collect();
    neg.reverse();
    if sorted.iter().zip(&neg).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(LatentOptError::InvalidArgument("displacements must be symmetric about 0".into()));
    }
    let d = z0.len();
    if d < 2 {
        return Err(LatentOptError::DimensionMismatch { expected: 2, got: d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
    let mut u = draw(&mut rng);
    while normalize(&mut u) < 1e-8 {
        u = draw(&mut rng);
    }
    let v = loop {
        let mut v = draw(&mut rng);
        // two Gram–Schmidt passes for orthogonality at rounding level
        for _ in 0..2 {
            let p: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(&u).for_each(|(a, b)| *a -= p * b);
        }
        if normalize(&mut v) > 1e-8 {
            break v;
        }
    };
    let cells = displacements
        .iter()
        .map(|&a| {
            displacements
                .iter()
                .map(|&b| z0.iter().enumerate().map(|(k, z)| z + a * u[k] + b * v[k]).collect())
                .collect()
        })
        .collect();
    Ok(WalkGrid { u, v, displacements: displacements.to_vec(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// (z1, z2, property) per corpus molecule.
    pub rows: Vec<(f64, f64, f64)>,
    pub histograms: [Histogram; 2],
    /// Standard normal density at each bin centre, per dimension.
    pub prior: [Vec<(f64, f64)>; 2],
}

fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if values.is_empty() { (-1.0, 1.0) } else if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * w).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let i = (((v - lo) / w) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { edges, counts }
}

fn prior_curve(h: &Histogram) -> Vec<(f64, f64)> {
    h.edges
        .windows(2)
        .map(|e| {
            let c = 0.5 * (e[0] + e[1]);
            (c, (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect()
}

/// Posterior means of a 2-D model with per-dimension histograms.
pub fn project_2d(
    params: &VaeParams,
    corpus: &[&str],
    property: &[f64],
    bins: usize,
) -> Result<Projection, LatentOptError> {
    if params.latent_dim() != 2 {
        return Err(LatentOptError::DimensionMismatch { expected: 2, got: params.latent_dim() });
    }
    if property.len() != corpus.len() {
        return Err(LatentOptError::InvalidArgument("one property value per molecule".into()));
    }
    if bins == 0 {
        return Err(LatentOptError::InvalidArgument("bins must be at least 1".into()));
    }
    let encoded = corpus.iter().map(|s| params.encode_str(s)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(corpus.len());
    for (chunk, props) in encoded.chunks(256).zip(property.chunks(256)) {
        let refs: Vec<_> = chunk.iter().collect();
        for (dist, p) in params.encode_batch(&refs)?.into_iter().zip(props) {
            rows.push((dist.mu[0] as f64, dist.mu[1] as f64, *p));
        }
    }
    let h0 = histogram(&rows.iter().map(|r| r.0).collect::<Vec<_>>(), bins);
    let h1 = histogram(&rows.iter().map(|r| r.1).collect::<Vec<_>>(), bins);
    let prior = [prior_curve(&h0), prior_curve(&h1)];
    Ok(Projection { rows, histograms: [h0, h1], prior })
}
