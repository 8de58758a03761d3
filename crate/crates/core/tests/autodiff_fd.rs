mod common;

use common::{grad_check, random_tensor};
use molvae::autodiff::{GruVars, Tape, Tensor, Var};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-3;
const TOL: f64 = 1e-4;
const CONFIGS: usize = 100;

fn dim(rng: &mut impl Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

/// Runs `case` on CONFIGS seeded configurations and returns the worst error.
fn sweep(seed: u64, mut case: impl FnMut(&mut ChaCha8Rng) -> f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..CONFIGS).map(|_| case(&mut rng)).fold(0.0, f64::max)
}

fn project(tape: &mut Tape<f64>, out: Var, r: &Tensor<f64>) -> Var {
    tape.weighted_sum(out, r).unwrap()
}

#[test]
fn dense_gradients() {
    let worst = sweep(1, |rng| {
        let (n, i, o) = (dim(rng, 1, 4), dim(rng, 1, 6), dim(rng, 1, 5));
        let r = random_tensor(&[n, o], 1.0, rng);
        let inputs = [random_tensor(&[n, i], 1.0, rng), random_tensor(&[i, o], 1.0, rng), random_tensor(&[o], 1.0, rng)];
        grad_check(&inputs, STEP, |t, v| {
            let y = t.dense(v[0], v[1], v[2]).unwrap();
            let y = t.tanh(y);
            project(t, y, &r)
        })
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn conv1d_gradients() {
    let worst = sweep(2, |rng| {
        let (n, cin, cout, w) = (dim(rng, 1, 2), dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 4));
        let len = w + dim(rng, 0, 5);
        let r = random_tensor(&[n, len - w + 1, cout], 1.0, rng);
        let inputs = [
            random_tensor(&[n, len, cin], 1.0, rng),
            random_tensor(&[w, cin, cout], 0.7, rng),
            random_tensor(&[cout], 0.5, rng),
        ];
        grad_check(&inputs, STEP, |t, v| {
            let y = t.conv1d(v[0], v[1], v[2]).unwrap();
            project(t, y, &r)
        })
    });
    assert!(worst <= TOL, "{worst}");
}

fn gru_inputs(rng: &mut ChaCha8Rng, n: usize, steps: usize, i: usize, h: usize) -> Vec<Tensor<f64>> {
    vec![
        random_tensor(&[n, steps, i], 1.0, rng),
        random_tensor(&[n, h], 0.8, rng),
        random_tensor(&[i, 3 * h], 0.8, rng),
        random_tensor(&[h, 2 * h], 0.8, rng),
        random_tensor(&[h, h], 0.8, rng),
        random_tensor(&[3 * h], 0.5, rng),
    ]
}

fn gru_vars(v: &[Var]) -> GruVars {
    GruVars { wx: v[2], uzr: v[3], uh: v[4], b: v[5] }
}

#[test]
fn gru_bptt_over_five_steps() {
    let worst = sweep(3, |rng| {
        let (n, i, h) = (dim(rng, 1, 3), dim(rng, 1, 4), dim(rng, 1, 4));
        let r = random_tensor(&[n, 5, h], 1.0, rng);
        grad_check(&gru_inputs(rng, n, 5, i, h), STEP, |t, v| {
            let y = t.gru(v[0], v[1], gru_vars(v)).unwrap();
            project(t, y, &r)
        })
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn chained_gru_cells_match_finite_differences() {
    let worst = sweep(4, |rng| {
        let (n, i, h) = (dim(rng, 1, 2), dim(rng, 1, 3), dim(rng, 1, 3));
        let r = random_tensor(&[n, h], 1.0, rng);
        let mut inputs = gru_inputs(rng, n, 5, i, h);
        inputs[0] = random_tensor(&[n, i], 1.0, rng);
        grad_check(&inputs, STEP, |t, v| {
            // same input each step; the loss reads only the last state
            let mut state = v[1];
            for _ in 0..5 {
                state = t.gru_cell(v[0], state, gru_vars(v)).unwrap();
            }
            project(t, state, &r)
        })
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn softmax_xent_gradients() {
    let worst = sweep(5, |rng| {
        let (rows, vocab) = (dim(rng, 1, 6), dim(rng, 2, 7));
        let targets: Vec<usize> = (0..rows).map(|_| rng.random_range(0..vocab)).collect();
        grad_check(&[random_tensor(&[rows, vocab], 3.0, rng)], STEP, |t, v| t.softmax_xent(v[0], &targets).unwrap())
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn reparameterization_gradients() {
    let worst = sweep(6, |rng| {
        let (n, d) = (dim(rng, 1, 3), dim(rng, 1, 6));
        let eps = random_tensor(&[n, d], 2.0, rng);
        let r = random_tensor(&[n, d], 1.0, rng);
        let inputs = [random_tensor(&[n, d], 1.0, rng), random_tensor(&[n, d], 2.0, rng)];
        grad_check(&inputs, STEP, |t, v| {
            let z = t.gauss_sample(v[0], v[1], &eps).unwrap();
            project(t, z, &r)
        })
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn kl_gradients() {
    let worst = sweep(7, |rng| {
        let (n, d) = (dim(rng, 1, 3), dim(rng, 1, 6));
        let inputs = [random_tensor(&[n, d], 2.0, rng), random_tensor(&[n, d], 2.0, rng)];
        grad_check(&inputs, STEP, |t, v| t.kl_std_normal(v[0], v[1]).unwrap())
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn composite_encoder_decoder_shape_gradients() {
    // concat, repeat, reshape and mse inside one graph
    let worst = sweep(8, |rng| {
        let (n, d, steps) = (dim(rng, 1, 2), dim(rng, 1, 3), dim(rng, 1, 3));
        let target = random_tensor(&[n, steps, 2 * d], 1.0, rng);
        let inputs = [random_tensor(&[n, d], 1.0, rng), random_tensor(&[n, steps, d], 1.0, rng)];
        grad_check(&inputs, STEP, |t, v| {
            let rep = t.repeat(v[0], steps).unwrap();
            let cat = t.concat(rep, v[1]).unwrap();
            let flat = t.reshape(cat, &[n * steps * 2 * d]).unwrap();
            let back = t.reshape(flat, &[n, steps, 2 * d]).unwrap();
            let s = t.sigmoid(back);
            let s = t.scale(s, 1.7);
            t.mse(s, &target).unwrap()
        })
    });
    assert!(worst <= TOL, "{worst}");
}

#[test]
fn closed_form_examples() {
    let mut t = Tape::<f64>::new();
    let logits = t.leaf(Tensor::zeros(&[3, 5]));
    let l = t.softmax_xent(logits, &[0, 2, 4]).unwrap();
    assert!((t.value(l).item() - 5f64.ln()).abs() < 1e-12);

    let mu = t.leaf(Tensor::new(vec![1, 1], vec![1.0]).unwrap());
    let lv = t.leaf(Tensor::zeros(&[1, 1]));
    let kl = t.kl_std_normal(mu, lv).unwrap();
    assert!((t.value(kl).item() - 0.5).abs() < 1e-15);

    let z = t.gauss_sample(mu, lv, &Tensor::new(vec![1, 1], vec![0.25]).unwrap()).unwrap();
    assert_eq!(t.value(z).item(), 1.25);
    let z0 = t.gauss_sample(mu, lv, &Tensor::zeros(&[1, 1])).unwrap();
    assert_eq!(t.value(z0).item(), 1.0);

    let x = t.leaf(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let eye = t.leaf(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let zb = t.leaf(Tensor::zeros(&[2]));
    let y = t.dense(x, eye, zb).unwrap();
    assert_eq!(t.value(y).data, vec![1.0, 2.0, 3.0, 4.0]);

    let peaked = t.leaf(Tensor::new(vec![1, 3], vec![50.0, 0.0, 0.0]).unwrap());
    let l = t.softmax_xent(peaked, &[0]).unwrap();
    assert!(t.value(l).item() < 1e-20);
}

#[test]
fn conv_identity_and_constant_cases() {
    let mut t = Tape::<f64>::new();
    let x = t.leaf(Tensor::new(vec![1, 3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let k = t.leaf(Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let b = t.leaf(Tensor::zeros(&[2]));
    let y = t.conv1d(x, k, b).unwrap();
    assert_eq!(t.value(y).data, t.value(x).data);

    // constant input 2 over 3 channels, kernel entries all 0.5, width 2
    let xc = t.leaf(Tensor::filled(&[1, 4, 3], 2.0));
    let kc = t.leaf(Tensor::filled(&[2, 3, 1], 0.5));
    let bc = t.leaf(Tensor::new(vec![1], vec![0.25]).unwrap());
    let yc = t.conv1d(xc, kc, bc).unwrap();
    assert_eq!(t.value(yc).data, vec![6.25; 3]);
}

#[test]
fn gru_limit_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, i, h) = (2, 3, 4);
    let mut t = Tape::<f64>::new();
    let x = t.leaf(random_tensor(&[n, i], 1.0, &mut rng));
    let h0 = t.leaf(random_tensor(&[n, h], 1.0, &mut rng));
    let mut b = random_tensor(&[3 * h], 1.0, &mut rng);
    b.data[..h].iter_mut().for_each(|v| *v = -50.0);
    let w = GruVars {
        wx: t.leaf(random_tensor(&[i, 3 * h], 0.5, &mut rng)),
        uzr: t.leaf(random_tensor(&[h, 2 * h], 0.5, &mut rng)),
        uh: t.leaf(random_tensor(&[h, h], 0.5, &mut rng)),
        b: t.leaf(b),
    };
    let h1 = t.gru_cell(x, h0, w).unwrap();
    for (a, p) in t.value(h1).data.iter().zip(&t.value(h0).data) {
        assert!((a - p).abs() < 1e-3);
    }

    let mut t = Tape::<f64>::new();
    let zero = |t: &mut Tape<f64>, s: &[usize]| t.leaf(Tensor::zeros(s));
    let x = zero(&mut t, &[n, i]);
    let h0 = zero(&mut t, &[n, h]);
    let w = GruVars { wx: zero(&mut t, &[i, 3 * h]), uzr: zero(&mut t, &[h, 2 * h]), uh: zero(&mut t, &[h, h]), b: zero(&mut t, &[3 * h]) };
    let h1 = t.gru_cell(x, h0, w).unwrap();
    assert!(t.value(h1).data.iter().all(|&v| v == 0.0));
}

#[test]
fn no_overflow_for_large_finite_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut big = |s: &[usize]| {
        let n = s.iter().product();
        Tensor::new(s.to_vec(), (0..n).map(|_| if rng.next_u32() % 2 == 0 { 1e3 } else { -1e3 }).collect()).unwrap()
    };
    let mut t = Tape::<f32>::new();
    let (a, b) = (big(&[2, 3]), big(&[2, 3]));
    let mu = t.leaf(a.cast());
    let lv = t.leaf(b.cast());
    let z = t.gauss_sample(mu, lv, &Tensor::filled(&[2, 3], 1.0)).unwrap();
    let kl = t.kl_std_normal(mu, lv).unwrap();
    let s = t.sigmoid(z);
    let th = t.tanh(z);
    let xent = t.softmax_xent(z, &[0, 1]).unwrap();
    for v in [z, kl, s, th, xent] {
        assert!(t.value(v).all_finite());
    }
    let total = t.add(kl, xent).unwrap();
    let g = t.backward(total).unwrap();
    assert!(g.get(mu).all_finite() && g.get(lv).all_finite());
}

#[test]
fn kl_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let mut t = Tape::<f64>::new();
        let mu = t.leaf(random_tensor(&[2, 4], 3.0, &mut rng));
        let lv = t.leaf(random_tensor(&[2, 4], 4.0, &mut rng));
        let kl = t.kl_std_normal(mu, lv).unwrap();
        assert!(t.value(kl).item() >= 0.0);
    }
}
