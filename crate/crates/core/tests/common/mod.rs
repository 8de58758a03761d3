//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use molvae::smiles::{validate, Atom, BondKind, Element, MolGraph};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore};

/// Atom label compared by the isomorphism oracle.
fn atom_label(g: &MolGraph, i: usize) -> (u8, i8, bool, u8, Option<u16>) {
    let a = g.atom(i);
    (
        a.element.atomic_number(),
        a.charge,
        a.aromatic,
        g.hydrogen_count(i),
        a.isotope,
    )
}

/// Backtracking (VF2-style) labelled graph isomorphism.
pub fn isomorphic(g: &MolGraph, h: &MolGraph) -> bool {
    let n = g.atom_count();
    if n != h.atom_count() || g.bond_count() != h.bond_count() {
        return false;
    }
    let mut lg: Vec<_> = (0..n).map(|i| (atom_label(g, i), g.degree(i))).collect();
    let mut lh: Vec<_> = (0..n).map(|i| (atom_label(h, i), h.degree(i))).collect();
    lg.sort();
    lh.sort();
    if lg != lh {
        return false;
    }
    // match g atoms in BFS order so each new atom has a mapped neighbor
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut q = std::collections::VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            order.push(v);
            for &(w, _) in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend(g, h, &order, 0, &mut map, &mut used)
}

fn extend(
    g: &MolGraph,
    h: &MolGraph,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    for cand in 0..h.atom_count() {
        if used[cand]
            || atom_label(g, v) != atom_label(h, cand)
            || g.degree(v) != h.degree(cand)
        {
            continue;
        }
        let consistent = g.neighbors(v).iter().all(|&(w, b)| {
            let mw = map[w];
            if mw == usize::MAX {
                return true;
            }
            match h.bond_between(cand, mw) {
                Some(hb) => h.bond(hb).kind == g.bond(b).kind,
                None => false,
            }
        });
        if !consistent {
            continue;
        }
        map[v] = cand;
        used[cand] = true;
        if extend(g, h, order, depth + 1, map, used) {
            return true;
        }
        map[v] = usize::MAX;
        used[cand] = false;
    }
    false
}

pub fn random_permutation(n: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn max_valence(atom: &Atom) -> u8 {
    match atom.element {
        Element::C => 4,
        Element::N => 3,
        Element::O | Element::S => 2,
        _ => 1,
    }
}

fn spare(g: &MolGraph, i: usize) -> u8 {
    let a = g.atom(i);
    let (arom, other) = g.bond_order_split(i);
    if a.aromatic {
        // ring carbons take one substituent; ring nitrogens none
        return if a.element == Element::C && arom == 2 && other == 0 { 1 } else { 0 };
    }
    max_valence(a).saturating_sub(other)
}

/// A random valid molecule with `2..=max_atoms` heavy atoms: an optional
/// aromatic six-ring, a random tree of aliphatic atoms, and a few extra ring
/// bonds.
pub fn random_molecule(max_atoms: usize, rng: &mut impl RngCore) -> MolGraph {
    loop {
        let target = rng.random_range(2..=max_atoms);
        let mut g = MolGraph::new();
        if target >= 8 && rng.random_bool(0.4) {
            let hetero = rng.random_range(0..3);
            for k in 0..6 {
                let el = if k < hetero && k % 2 == 0 { Element::N } else { Element::C };
                g.add_atom(Atom::organic(el, true));
            }
            for k in 0..6 {
                g.add_bond(k, (k + 1) % 6, BondKind::Aromatic).unwrap();
            }
        } else {
            g.add_atom(Atom::organic(Element::C, false));
        }
        let elements = [
            Element::C,
            Element::C,
            Element::C,
            Element::C,
            Element::N,
            Element::O,
            Element::S,
            Element::F,
            Element::CL,
        ];
        while g.atom_count() < target {
            let hosts: Vec<usize> = (0..g.atom_count()).filter(|&i| spare(&g, i) > 0).collect();
            let Some(&host) = hosts.choose(rng) else { break };
            let el = *elements.choose(rng).unwrap();
            let new = g.add_atom(Atom::organic(el, false));
            let limit = spare(&g, host).min(max_valence(g.atom(new)));
            let order = if limit >= 2 && rng.random_bool(0.2) { 2 } else { 1 };
            let kind = if order == 2 { BondKind::Double } else { BondKind::Single };
            g.add_bond(host, new, kind).unwrap();
        }
        let extra = rng.random_range(0..=2);
        for _ in 0..extra {
            let n = g.atom_count();
            if n < 3 {
                break;
            }
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b || g.bond_between(a, b).is_some() || spare(&g, a) == 0 || spare(&g, b) == 0 {
                continue;
            }
            if g.atom(a).aromatic || g.atom(b).aromatic {
                continue;
            }
            g.add_bond(a, b, BondKind::Single).unwrap();
        }
        if validate(&g).valid {
            return g;
        }
    }
}

/// Every simple cycle, as a sorted list of bond indices.
pub fn all_simple_cycles(g: &MolGraph) -> Vec<Vec<usize>> {
    let n = g.atom_count();
    let mut cycles = std::collections::BTreeSet::new();
    for start in 0..n {
        let mut path = vec![start];
        let mut bonds = Vec::new();
        let mut on_path = vec![false; n];
        on_path[start] = true;
        dfs_cycles(g, start, start, &mut path, &mut bonds, &mut on_path, &mut cycles);
    }
    cycles.into_iter().collect()
}

fn dfs_cycles(
    g: &MolGraph,
    start: usize,
    v: usize,
    path: &mut Vec<usize>,
    bonds: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut std::collections::BTreeSet<Vec<usize>>,
) {
    for &(w, b) in g.neighbors(v) {
        if bonds.last() == Some(&b) {
            continue;
        }
        if w == start && path.len() >= 3 {
            let mut cyc = bonds.clone();
            cyc.push(b);
            cyc.sort_unstable();
            out.insert(cyc);
        } else if w > start && !on_path[w] {
            on_path[w] = true;
            path.push(w);
            bonds.push(b);
            dfs_cycles(g, start, w, path, bonds, on_path, out);
            bonds.pop();
            path.pop();
            on_path[w] = false;
        }
    }
}

/// For every bond on some cycle, the length of the shortest cycle through it.
pub fn shortest_cycle_per_bond(g: &MolGraph) -> Vec<Option<usize>> {
    let mut best = vec![None; g.bond_count()];
    for cyc in all_simple_cycles(g) {
        for &b in &cyc {
            let cur: &mut Option<usize> = &mut best[b];
            if cur.is_none_or(|c| cyc.len() < c) {
                *cur = Some(cyc.len());
            }
        }
    }
    best
}

/// Random connected multigraph-free graph on `n` carbon atoms (single bonds),
/// used for ring-perception checks on arbitrary topologies.
pub fn random_carbon_graph(n: usize, extra_edges: usize, rng: &mut impl RngCore) -> MolGraph {
    let mut g = MolGraph::new();
    for _ in 0..n {
        g.add_atom(Atom::bracket(Element::C, false, 0, 0));
    }
    for v in 1..n {
        let u = rng.random_range(0..v);
        g.add_bond(u, v, BondKind::Single).unwrap();
    }
    for _ in 0..extra_edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && g.bond_between(a, b).is_none() {
            g.add_bond(a, b, BondKind::Single).unwrap();
        }
    }
    g
}

/// Molecules with their atom classes assigned by hand from the bundled
/// logP table, in atom order.
pub const LOGP_HAND_CASES: &[(&str, &[&str])] = &[
    ("C", &["C1"]),
    ("CC", &["C1", "C1"]),
    ("CCO", &["C1", "C3", "O2"]),
    ("c1ccccc1", &["C18"; 6]),
    ("Cc1ccccc1", &["C8", "C21", "C18", "C18", "C18", "C18", "C18"]),
    ("CC=O", &["C1", "C5", "O9"]),
    ("CC#N", &["C1", "C7", "N14"]),
    ("c1ccncc1", &["C18", "C18", "C18", "N11", "C18", "C18"]),
    ("Oc1ccccc1", &["O2", "C22", "C18", "C18", "C18", "C18", "C18"]),
    ("Nc1ccccc1", &["N1", "C22", "C18", "C18", "C18", "C18", "C18"]),
    ("CN(C)C", &["C3", "N3", "C3", "C3"]),
    ("CCNC", &["C1", "C3", "N2", "C3"]),
    ("c1ccc2ccccc2c1", &["C18", "C18", "C18", "C19", "C18", "C18", "C18", "C18", "C19", "C18"]),
    ("ClC(Cl)Cl", &["Cl", "C4", "Cl", "Cl"]),
    ("C=C", &["C6", "C6"]),
    ("CC(=O)O", &["C1", "C5", "O9", "O2"]),
    ("c1ccoc1", &["C18", "C18", "C18", "O1", "C18"]),
    ("c1ccsc1", &["C18", "C18", "C18", "S3", "C18"]),
    ("CS(=O)(=O)C", &["C3", "S2", "O9", "O9", "C3"]),
    ("O=c1cc[nH]cc1", &["O9", "C25", "C18", "C18", "N12", "C18", "C18"]),
    ("C[N+](C)(C)C", &["C3", "N13", "C3", "C3", "C3"]),
    ("FC(F)(F)c1ccccc1", &["F", "C4", "F", "F", "C21", "C18", "C18", "C18", "C18", "C18"]),
    ("COc1ccccc1", &["C3", "O4", "C22", "C18", "C18", "C18", "C18", "C18"]),
    ("BrCCI", &["Br", "C3", "C3", "I"]),
];

/// Class → contribution, read straight from the CSV text.
pub fn logp_contributions(csv: &str) -> std::collections::HashMap<String, f64> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[9].parse().unwrap())
        })
        .collect()
}

/// Largest over bonds of the shortest cycle through that bond, minus six.
pub fn brute_force_ring_penalty(g: &MolGraph) -> f64 {
    let largest = shortest_cycle_per_bond(g).into_iter().flatten().max().unwrap_or(0);
    largest.saturating_sub(6) as f64
}

/// Every labelled simple graph on `n` carbon atoms (all 2^(n(n-1)/2) edge sets).
pub fn all_carbon_graphs(n: usize) -> impl Iterator<Item = MolGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    (0u64..1 << pairs.len()).map(move |mask| {
        let mut g = MolGraph::new();
        for _ in 0..n {
            g.add_atom(Atom::bracket(Element::C, false, 0, 0));
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                g.add_bond(a, b, BondKind::Single).unwrap();
            }
        }
        g
    })
}

use molvae::autodiff::{Tape, Tensor, Var};

pub fn random_tensor(shape: &[usize], scale: f64, rng: &mut impl RngCore) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Largest norm-wise relative error, over all inputs, between tape
/// gradients and central differences (step `h`) of the scalar built by `f`.
pub fn grad_check<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |inputs: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = f(&mut tape, &vars);
        (tape, vars, loss)
    };
    let (tape, vars, loss) = eval(inputs);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).data;
        let mut numeric = vec![0.0; analytic.len()];
        let mut work = inputs.to_vec();
        for i in 0..analytic.len() {
            let x0 = work[k].data[i];
            work[k].data[i] = x0 + h;
            let (t, _, l) = eval(&work);
            let up = t.value(l).item();
            work[k].data[i] = x0 - h;
            let (t, _, l) = eval(&work);
            let down = t.value(l).item();
            work[k].data[i] = x0;
            numeric[i] = (up - down) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / na.max(nn).max(1e-8));
    }
    worst
}

/// Exact GP regression with an isotropic squared-exponential kernel on
/// standardized targets. Returns predictive means in the units of `y`.
pub fn exact_gp_predict(
    x: &[Vec<f64>],
    y: &[f64],
    lengthscale: f64,
    noise: f64,
    xs: &[Vec<f64>],
) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let n = x.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-300);
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (-0.5 * d2 / (lengthscale * lengthscale)).exp()
    };
    let mut kxx = DMatrix::from_fn(n, n, |i, j| k(&x[i], &x[j]));
    for i in 0..n {
        kxx[(i, i)] += noise;
    }
    let ys = DVector::from_iterator(n, y.iter().map(|v| (v - mean) / sd));
    let alpha = kxx.cholesky().expect("exact GP kernel not PD").solve(&ys);
    xs.iter()
        .map(|p| mean + sd * (0..n).map(|i| k(p, &x[i]) * alpha[i]).sum::<f64>())
        .collect()
}

/// Exact GP log marginal likelihood for the same model.
pub fn exact_gp_log_evidence(x: &[Vec<f64>], y: &[f64], lengthscale: f64, noise: f64) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let n = x.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-300);
    let mut kxx = DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = x[i].iter().zip(&x[j]).map(|(p, q)| (p - q) * (p - q)).sum();
        (-0.5 * d2 / (lengthscale * lengthscale)).exp()
    });
    for i in 0..n {
        kxx[(i, i)] += noise;
    }
    let ys = DVector::from_iterator(n, y.iter().map(|v| (v - mean) / sd));
    let Some(c) = kxx.cholesky() else { return f64::NEG_INFINITY };
    let alpha = c.solve(&ys);
    -0.5 * ys.dot(&alpha) - c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Exact GP with lengthscale and noise chosen by evidence over a grid.
pub fn exact_gp_grid_predict(x: &[Vec<f64>], y: &[f64], xs: &[Vec<f64>]) -> Vec<f64> {
    let mut best = (f64::NEG_INFINITY, 1.0, 1e-6);
    for li in 0..40 {
        let l = 0.1 * 1.15f64.powi(li);
        for noise in [1e-6, 1e-4, 1e-2] {
            let e = exact_gp_log_evidence(x, y, l, noise);
            if e > best.0 {
                best = (e, l, noise);
            }
        }
    }
    exact_gp_predict(x, y, best.1, best.2, xs)
}

/// E[max(f − best, 0)] for f ~ N(mu, sigma²) by composite Simpson.
pub fn ei_quadrature(mu: f64, sigma: f64, best: f64) -> f64 {
    let lo = best.max(mu - 12.0 * sigma);
    let hi = mu + 12.0 * sigma;
    if hi <= lo {
        return 0.0;
    }
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let f = |t: f64| {
        let u = (t - mu) / sigma;
        (t - best) * (-0.5 * u * u).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Best value of `g` over `budget` clipped standard-normal draws.
pub fn random_search_best(g: impl Fn(&[f64]) -> f64, d: usize, budget: usize, bound: f64, rng: &mut impl RngCore) -> f64 {
    use rand_distr::StandardNormal;
    (0..budget)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-bound, bound)).collect();
            g(&z)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
