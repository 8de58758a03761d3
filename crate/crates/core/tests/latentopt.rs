use molvae::latentopt::*;
use molvae::smiles::corpus_lines;
use molvae::vae::{encode_corpus, VaeConfig, VaeParams, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const ZINC: &str = include_str!("../../../data/zinc_5k.smi");

fn gaussian_points(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn no_decode(_: &[f64]) -> Result<Option<String>, LatentOptError> {
    Ok(None)
}

fn quick_predictor(seed: u64) -> (Vec<Vec<f64>>, MlpPredictor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_points(200, 4, &mut rng);
    let y: Vec<f64> = x.iter().map(|z| (z[0] - z[1]).sin() + 0.3 * z[2] * z[3]).collect();
    let cfg = PredictorConfig { epochs: 40, seed, ..Default::default() };
    let (m, _) = fit_predictor(&x, &y, &cfg).unwrap();
    (x, m)
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let (x, m) = quick_predictor(1);
    for z in x.iter().take(20) {
        let (v, g) = m.value_and_gradient(z).unwrap();
        assert!((v - m.predict(z).unwrap()).abs() < 1e-12);
        let fd: Vec<f64> = (0..z.len())
            .map(|k| {
                let (mut p, mut q) = (z.clone(), z.clone());
                p[k] += 1e-5;
                q[k] -= 1e-5;
                (m.predict(&p).unwrap() - m.predict(&q).unwrap()) / 2e-5
            })
            .collect();
        let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-8);
        assert!(num / den <= 1e-4, "{}", num / den);
    }
}

#[test]
fn zero_targets_give_zero_predictor() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = gaussian_points(50, 3, &mut rng);
    let (m, report) = fit_predictor(&x, &[0.0; 50], &PredictorConfig { epochs: 20, ..Default::default() }).unwrap();
    assert!(report.train_rmse < 1e-3, "{report:?}");
    assert!(x.iter().all(|z| m.predict(z).unwrap().abs() < 1e-3));
}

#[test]
fn recovers_linear_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 8;
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let x = gaussian_points(1000, d, &mut rng);
    let y: Vec<f64> = x.iter().map(|z| z.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
    let (_, report) = fit_predictor(&x, &y, &PredictorConfig::default()).unwrap();
    assert!(report.valid_rmse.unwrap() <= 0.05, "{report:?}");
}

#[test]
fn predictor_is_deterministic() {
    assert_eq!(quick_predictor(4).1, quick_predictor(4).1);
    assert!(matches!(fit_predictor(&vec![vec![0.0]; 5], &[0.0; 5], &PredictorConfig::default()), Err(LatentOptError::TooFewSamples(5))));
}

#[test]
fn ascent_reaches_quadratic_optimum() {
    let target = vec![0.3, -1.2, 2.0, 0.5];
    let f = |z: &[f64]| {
        let v = -z.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        (v, z.iter().zip(&target).map(|(a, b)| -2.0 * (a - b)).collect::<Vec<_>>())
    };
    let cfg = AscentConfig { steps: 60, step_size: 0.2, ..Default::default() };
    let t = gradient_ascent(&f, &[0.0; 4], &cfg, &mut no_decode).unwrap();
    let last = &t.points.last().unwrap().z;
    let dist: f64 = last.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(dist <= 1e-6, "{dist}");
    assert!(t.points.windows(2).all(|w| w[1].value >= w[0].value));

    let origin = |z: &[f64]| (-z.iter().map(|v| v * v).sum::<f64>(), z.iter().map(|v| -2.0 * v).collect::<Vec<_>>());
    let t = gradient_ascent(&origin, &[1.0, -2.0], &cfg, &mut no_decode).unwrap();
    assert!(t.points.last().unwrap().z.iter().all(|v| v.abs() <= 1e-6));
}

#[test]
fn ascent_on_predictor_is_monotone_with_backtracking() {
    let (x, m) = quick_predictor(5);
    let cfg = AscentConfig { steps: 15, step_size: 0.5, ..Default::default() };
    let mut decoded = 0;
    let mut dec = |_: &[f64]| {
        decoded += 1;
        Ok(Some("C".to_string()))
    };
    let t = gradient_ascent(&m, &x[0], &cfg, &mut dec).unwrap();
    assert!(t.points.len() >= 11);
    assert_eq!(decoded, t.points.len());
    assert!(t.points.windows(2).all(|w| w[1].value >= w[0].value));
}

#[test]
fn ascent_rejects_bad_input() {
    let nan = |_: &[f64]| (0.0, vec![f64::NAN]);
    assert!(matches!(
        gradient_ascent(&nan, &[0.0], &AscentConfig::default(), &mut no_decode),
        Err(LatentOptError::NonFiniteGradient)
    ));
    let ok = |_: &[f64]| (0.0, vec![0.0]);
    let cfg = AscentConfig { steps: 0, ..Default::default() };
    assert!(gradient_ascent(&ok, &[0.0], &cfg, &mut no_decode).is_err());
}

#[test]
fn perturbation() {
    let z = vec![0.5, -0.5, 1.0];
    assert!(perturb(&z, 0.0, 5, 1).unwrap().iter().all(|p| *p == z));
    assert_eq!(perturb(&z, 0.3, 5, 1).unwrap(), perturb(&z, 0.3, 5, 1).unwrap());
    assert_ne!(perturb(&z, 0.3, 5, 1).unwrap(), perturb(&z, 0.3, 5, 2).unwrap());
    assert!(perturb(&z, -1.0, 5, 1).is_err());
    let d = distinct_molecules(&[Some("OCC".into()), None, Some("CCO".into()), Some("C".into())]);
    assert_eq!(d.len(), 2);
}

#[test]
fn bilinear_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c: Vec<Vec<f64>> = gaussian_points(4, 5, &mut rng);
    let corners = [c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone()];
    let res = 5;
    let g = interpolate_grid(&corners, res).unwrap();
    assert_eq!(g.len(), res * res);
    let at = |r: usize, k: usize| &g[r * res + k].z;
    assert_eq!(at(0, 0), &corners[0]);
    assert_eq!(at(0, res - 1), &corners[1]);
    assert_eq!(at(res - 1, 0), &corners[2]);
    assert_eq!(at(res - 1, res - 1), &corners[3]);
    for k in 0..5 {
        let mean = c.iter().map(|p| p[k]).sum::<f64>() / 4.0;
        assert!((at(2, 2)[k] - mean).abs() <= 1e-9);
        // affine along an edge: equal spacing
        let steps: Vec<f64> = (1..res).map(|j| at(0, j)[k] - at(0, j - 1)[k]).collect();
        assert!(steps.iter().all(|s| (s - steps[0]).abs() <= 1e-12));
    }
    let same = [c[0].clone(), c[0].clone(), c[0].clone(), c[0].clone()];
    assert!(interpolate_grid(&same, 4).unwrap().iter().all(|cell| cell.z.iter().zip(&c[0]).all(|(a, b)| (a - b).abs() < 1e-12)));
    assert!(interpolate_grid(&corners, 1).is_err());
}

#[test]
fn random_walk_directions() {
    let z0 = vec![0.1; 56];
    let disp = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let w = random_walk_2d(&z0, &disp, 7).unwrap();
    let dot: f64 = w.u.iter().zip(&w.v).map(|(a, b)| a * b).sum();
    let nu: f64 = w.u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = w.v.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(dot.abs() <= 1e-9 && (nu - 1.0).abs() <= 1e-9 && (nv - 1.0).abs() <= 1e-9);
    assert_eq!(w.cells[2][2], z0);
    assert_eq!(w, random_walk_2d(&z0, &disp, 7).unwrap());
    assert!(random_walk_2d(&z0, &[0.0, 1.0], 7).is_err());
    assert!(random_walk_2d(&z0, &[], 7).is_err());
}

#[test]
fn two_dimensional_projection() {
    let corpus: Vec<&str> = corpus_lines(ZINC).take(40).collect();
    let cfg = VaeConfig {
        max_len: 60,
        latent_dim: 2,
        conv_filters: vec![2, 2, 2],
        conv_widths: vec![3, 3, 3],
        encoder_dense: 8,
        decoder_dense: 8,
        gru_hidden: 8,
        gru_layers: 1,
    };
    let vocab = Vocabulary::build(&corpus, cfg.max_len).unwrap();
    let _ = encode_corpus(&corpus, &vocab, cfg.max_len).unwrap();
    let params = VaeParams::init(cfg.clone(), vocab.clone(), 1).unwrap();
    let prop: Vec<f64> = (0..corpus.len()).map(|i| i as f64).collect();
    let p = project_2d(&params, &corpus, &prop, 7).unwrap();
    assert_eq!(p.rows.len(), corpus.len());
    for h in &p.histograms {
        assert_eq!(h.counts.iter().sum::<usize>(), corpus.len());
    }
    for (c, dens) in &p.prior[0] {
        assert!((dens - (-c * c / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }
    let wide = VaeParams::init(VaeConfig { latent_dim: 3, ..cfg }, vocab, 1).unwrap();
    assert!(matches!(project_2d(&wide, &corpus, &prop, 7), Err(LatentOptError::DimensionMismatch { .. })));
}
