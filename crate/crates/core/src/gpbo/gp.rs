//! FITC sparse GP with an ARD squared-exponential kernel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GpError;

pub const JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-2;

/// How the noise variance is treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Learned, starting from `init` and never dropping below `floor`
    /// (both on the standardized scale).
    Learn { init: f64, floor: f64 },
    /// Held at this value on the standardized scale.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub noise: NoiseMode,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 150,
            learning_rate: 0.05,
            noise: NoiseMode::Learn { init: 0.1, floor: 1e-6 },
            seed: 0,
        }
    }
}

/// Kernel and likelihood hyperparameters on the standardized scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Hyperparameters {
    fn to_log(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        t.push(self.signal_variance.ln());
        t.push(self.noise_variance.ln());
        t
    }

    fn from_log(t: &[f64]) -> Self {
        let d = t.len() - 2;
        Hyperparameters {
            lengthscales: t[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: t[d].exp(),
            noise_variance: t[d + 1].exp(),
        }
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (x - y) / l;
            s += d * d;
        }
        self.signal_variance * (-0.5 * s).exp()
    }
}

fn kernel_matrix(h: &Hyperparameters, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| h.kernel(&a[i], &b[j]))
}

/// Sparse GP surrogate. Immutable once fitted except through
/// [`SparseGp::add_fantasy`], which is meant for a private copy.
#[derive(Debug, Clone)]
pub struct SparseGp {
    inducing: Vec<Vec<f64>>,
    hyper: Hyperparameters,
    jitter: f64,
    y_mean: f64,
    y_std: f64,
    l_uu: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    b: DVector<f64>,
    w_mean: DVector<f64>,
    m_var: DMatrix<f64>,
}

/// Terms of the FITC evidence shared by the likelihood, its gradient and
/// the prediction caches.
struct Factors {
    l_uu: DMatrix<f64>,
    v: DMatrix<f64>,
    lambda: DVector<f64>,
    l_a: DMatrix<f64>,
    jitter: f64,
}

fn cholesky_with_jitter(k: &DMatrix<f64>, start: f64) -> Result<(DMatrix<f64>, f64), GpError> {
    let mut jitter = start;
    loop {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter * k[(i, i)].max(1e-300);
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
        if jitter > MAX_JITTER {
            return Err(GpError::SingularKernel);
        }
    }
}

fn factorize(
    h: &Hyperparameters,
    x: &[Vec<f64>],
    z: &[Vec<f64>],
    jitter: f64,
) -> Result<Factors, GpError> {
    let kuu = kernel_matrix(h, z, z);
    let (l_uu, jitter) = cholesky_with_jitter(&kuu, jitter)?;
    let kuf = kernel_matrix(h, z, x);
    let v = l_uu.solve_lower_triangular(&kuf).ok_or(GpError::SingularKernel)?;
    let n = x.len();
    let lambda = DVector::from_fn(n, |i, _| {
        let q: f64 = v.column(i).norm_squared();
        (h.signal_variance - q).max(0.0) + h.noise_variance
    });
    let mut vl = v.clone();
    for (i, mut c) in vl.column_iter_mut().enumerate() {
        c /= lambda[i].sqrt();
    }
    let mut a = &vl * vl.transpose();
    for i in 0..a.nrows() {
        a[(i, i)] += 1.0;
    }
    let l_a = a.cholesky().ok_or(GpError::SingularKernel)?.l();
    Ok(Factors { l_uu, v, lambda, l_a, jitter })
}

/// Negative log marginal likelihood under FITC and its gradient with
/// respect to (log lengthscales, log signal variance, log noise variance).
pub fn fitc_nlml(
    h: &Hyperparameters,
    x: &[Vec<f64>],
    y: &[f64],
    z: &[Vec<f64>],
) -> Result<(f64, Vec<f64>), GpError> {
    let f = factorize(h, x, z, JITTER)?;
    let n = x.len();
    let m = z.len();
    let d = h.lengthscales.len();
    let y = DVector::from_column_slice(y);

    let beta = y.component_div(&f.lambda);
    let c = f.l_a.solve_lower_triangular(&(&f.v * &beta)).unwrap();
    let log_det: f64 = f.lambda.iter().map(|l| l.ln()).sum::<f64>()
        + 2.0 * f.l_a.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = y.dot(&beta) - c.norm_squared();
    let nlml = 0.5 * log_det + 0.5 * quad + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // C⁻¹ = Λ⁻¹ − PᵀP with P = L_A⁻¹ V Λ⁻¹.
    let mut p = f.v.clone();
    for (i, mut col) in p.column_iter_mut().enumerate() {
        col /= f.lambda[i];
    }
    let p = f.l_a.solve_lower_triangular(&p).unwrap();
    let alpha = &beta - p.transpose() * &c;
    // B = Kuu⁻¹ Kuf = L_uu⁻ᵀ V
    let bm = f.l_uu.transpose().solve_upper_triangular(&f.v).unwrap();

    // W = C⁻¹ − ααᵀ; need B·W, diag(W) and B·W·Bᵀ.
    let mut b_cinv = bm.clone();
    for (i, mut col) in b_cinv.column_iter_mut().enumerate() {
        col /= f.lambda[i];
    }
    b_cinv -= (&bm * p.transpose()) * &p;
    let b_alpha = &bm * &alpha;
    let bw = &b_cinv - &b_alpha * alpha.transpose();
    let w_diag = DVector::from_fn(n, |i, _| {
        1.0 / f.lambda[i] - p.column(i).norm_squared() - alpha[i] * alpha[i]
    });
    let mut b_wd = bm.clone();
    for (i, mut col) in b_wd.column_iter_mut().enumerate() {
        col *= w_diag[i];
    }
    let g_uf = (&bw - &b_wd) * 2.0;
    let g_uu = &bw * bm.transpose() - &b_wd * bm.transpose();

    let kuf = kernel_matrix(h, z, x);
    let kuu = kernel_matrix(h, z, z);
    let mut grad = vec![0.0; d + 2];
    for (k, l) in h.lengthscales.iter().enumerate() {
        let l2 = l * l;
        let mut s = 0.0;
        for j in 0..n {
            for u in 0..m {
                let diff = z[u][k] - x[j][k];
                s += g_uf[(u, j)] * kuf[(u, j)] * diff * diff / l2;
            }
        }
        for v in 0..m {
            for u in 0..m {
                let diff = z[u][k] - z[v][k];
                s -= g_uu[(u, v)] * kuu[(u, v)] * diff * diff / l2;
            }
        }
        grad[k] = 0.5 * s;
    }
    let w_sum: f64 = w_diag.iter().sum();
    grad[d] = 0.5
        * (g_uf.component_mul(&kuf).sum() - g_uu.component_mul(&kuu).sum()
            + h.signal_variance * w_sum);
    grad[d + 1] = 0.5 * h.noise_variance * w_sum;
    Ok((nlml, grad))
}

/// k-means++ seeding: the first centre uniformly, then proportional to
/// squared distance from the nearest chosen centre.
pub fn kmeans_pp(x: &[Vec<f64>], m: usize, seed: u64) -> Vec<usize> {
    let n = x.len();
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = x.iter().map(|p| dist2(p, &x[chosen[0]])).collect();
    while chosen.len() < m {
        let total: f64 = nearest.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with centres
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if r < *d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            while nearest[pick] <= 0.0 {
                pick = (pick + n - 1) % n;
            }
            pick
        };
        chosen.push(next);
        for (i, p) in x.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(p, &x[next]));
        }
    }
    chosen
}

fn median_distance(x: &[Vec<f64>]) -> f64 {
    let n = x.len().min(200);
    let mut ds = Vec::new();
    for i in 0..n {
        for j in 0..i {
            let d: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            ds.push(d.sqrt());
        }
    }
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if ds.is_empty() { 1.0 } else { ds[ds.len() / 2] };
    if med > 0.0 { med } else { 1.0 }
}

impl SparseGp {
    /// Fits a FITC model with `m` inducing points chosen from `x`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], m: usize, config: &FitConfig) -> Result<Self, GpError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(GpError::TooFewPoints(n));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(GpError::DimensionMismatch);
        }
        if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
            return Err(GpError::NonFiniteInput);
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let inducing: Vec<Vec<f64>> =
            kmeans_pp(x, m.max(1), config.seed).into_iter().map(|i| x[i].clone()).collect();

        let (noise_init, noise_floor, learn_noise) = match config.noise {
            NoiseMode::Learn { init, floor } => (init.max(floor), floor, true),
            NoiseMode::Fixed(v) => (v, v, false),
        };
        let init = Hyperparameters {
            lengthscales: vec![median_distance(x); d],
            signal_variance: 1.0,
            noise_variance: noise_init,
        };

        let mut theta = init.to_log();
        let log_floor = noise_floor.ln();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m1 = vec![0.0; theta.len()];
        let mut m2 = vec![0.0; theta.len()];
        for t in 0..=config.iterations {
            let h = Hyperparameters::from_log(&theta);
            let (val, mut g) = match fitc_nlml(&h, x, &ys, &inducing) {
                Ok(r) if r.0.is_finite() => r,
                // step back towards the best point on numerical failure
                _ => match &best {
                    Some((_, b)) => {
                        for (th, bv) in theta.iter_mut().zip(b) {
                            *th = 0.5 * (*th + bv);
                        }
                        continue;
                    }
                    None => return Err(GpError::SingularKernel),
                },
            };
            if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
                best = Some((val, theta.clone()));
            }
            if t == config.iterations {
                break;
            }
            if !learn_noise {
                g[d + 1] = 0.0;
            }
            let step = t as i32 + 1;
            for i in 0..theta.len() {
                m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
                m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m1[i] / (1.0 - b1.powi(step));
                let vh = m2[i] / (1.0 - b2.powi(step));
                theta[i] -= config.learning_rate * mh / (vh.sqrt() + eps);
                theta[i] = theta[i].clamp(-12.0, 12.0);
            }
            theta[d + 1] = if learn_noise { theta[d + 1].max(log_floor) } else { log_floor };
        }
        let hyper = Hyperparameters::from_log(&best.unwrap().1);
        Self::with_hyperparameters(x, y, inducing, hyper)
    }

    /// Builds the prediction caches for fixed hyperparameters (standardized
    /// scale) and inducing points.
    pub fn with_hyperparameters(
        x: &[Vec<f64>],
        y: &[f64],
        inducing: Vec<Vec<f64>>,
        hyper: Hyperparameters,
    ) -> Result<Self, GpError> {
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_std));
        let f = factorize(&hyper, x, &inducing, JITTER)?;
        let m = inducing.len();
        let l_a_inv = f
            .l_a
            .solve_lower_triangular(&DMatrix::identity(m, m))
            .ok_or(GpError::SingularKernel)?;
        let a_inv = l_a_inv.transpose() * l_a_inv;
        let b = &f.v * ys.component_div(&f.lambda);
        let mut gp = SparseGp {
            inducing,
            hyper,
            jitter: f.jitter,
            y_mean,
            y_std,
            l_uu: f.l_uu,
            a_inv,
            b,
            w_mean: DVector::zeros(m),
            m_var: DMatrix::zeros(m, m),
        };
        gp.refresh();
        Ok(gp)
    }

    fn refresh(&mut self) {
        let m = self.inducing.len();
        let lt = self.l_uu.transpose();
        let ab = &self.a_inv * &self.b;
        self.w_mean = lt.solve_upper_triangular(&ab).unwrap();
        // Kuu⁻¹ − L⁻ᵀ A⁻¹ L⁻¹
        let l_inv = self.l_uu.solve_lower_triangular(&DMatrix::identity(m, m)).unwrap();
        let kuu_inv = l_inv.transpose() * &l_inv;
        self.m_var = kuu_inv - l_inv.transpose() * &self.a_inv * &l_inv;
    }

    pub fn inducing(&self) -> &[Vec<f64>] {
        &self.inducing
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.hyper.lengthscales.len()
    }

    /// Noise variance in the units of y.
    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise_variance * self.y_std * self.y_std
    }

    /// Prior mean and variance (including noise) in the units of y.
    pub fn prior(&self) -> (f64, f64) {
        let s2 = self.y_std * self.y_std;
        (self.y_mean, (self.hyper.signal_variance + self.hyper.noise_variance) * s2)
    }

    fn k_u(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.inducing.len(), self.inducing.iter().map(|u| self.hyper.kernel(u, z)))
    }

    /// Predictive mean and variance of an observation at `z`.
    pub fn predict(&self, z: &[f64]) -> (f64, f64) {
        let k = self.k_u(z);
        let mean = k.dot(&self.w_mean);
        let var_f = (self.hyper.signal_variance - k.dot(&(&self.m_var * &k))).max(0.0);
        let var = var_f + self.hyper.noise_variance;
        (self.y_mean + self.y_std * mean, var * self.y_std * self.y_std)
    }

    /// Adds `(z, y)` as an extra observation with the inducing set fixed.
    pub fn add_observation(&mut self, z: &[f64], y: f64) {
        let k = self.k_u(z);
        let v = self.l_uu.solve_lower_triangular(&k).unwrap();
        let lambda = (self.hyper.signal_variance - v.norm_squared()).max(0.0) + self.hyper.noise_variance;
        let av = &self.a_inv * &v;
        let denom = lambda + v.dot(&av);
        self.a_inv -= &av * av.transpose() / denom;
        self.b += &v * ((y - self.y_mean) / self.y_std / lambda);
        let ab = &self.a_inv * &self.b;
        self.w_mean = self.l_uu.transpose().solve_upper_triangular(&ab).unwrap();
        let w = self.l_uu.transpose().solve_upper_triangular(&av).unwrap();
        self.m_var += &w * w.transpose() / denom;
    }

    /// Kriging Believer step: observe the current predictive mean at `z`.
    pub fn add_fantasy(&mut self, z: &[f64]) {
        let (mean, _) = self.predict(z);
        self.add_observation(z, mean);
    }
}

/// Draws `n` standard-normal points clipped to `±bound`.
pub(crate) fn prior_samples(n: usize, d: usize, bound: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    use rand_distr::StandardNormal;
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-bound, bound)).collect())
        .collect()
}
