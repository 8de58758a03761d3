mod common;

use std::collections::BTreeSet;

use molvae::smiles::{
    canonicalize, corpus_lines, parse_smiles, ring_sizes, rings, serialize, tokenize, validate,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VALID: &str = include_str!("../data/curated_valid.smi");
const INVALID: &str = include_str!("../data/curated_invalid.smi");
const ZINC: &str = include_str!("../../../data/zinc_5k.smi");

#[test]
fn curated_valid_strings_parse_and_validate() {
    let lines: Vec<_> = corpus_lines(VALID).collect();
    assert!(lines.len() >= 150);
    for s in lines {
        let g = parse_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"));
        let r = validate(&g);
        assert!(r.valid, "{s}: {:?}", r.violations);
    }
}

#[test]
fn curated_invalid_strings_are_rejected_or_flagged() {
    let lines: Vec<_> = corpus_lines(INVALID).collect();
    assert!(lines.len() >= 50);
    for s in lines {
        if let Ok(g) = parse_smiles(s) {
            assert!(!validate(&g).valid, "{s} was accepted");
        }
    }
}

#[test]
fn tokens_concatenate_to_input() {
    for s in corpus_lines(VALID).chain(corpus_lines(ZINC).take(500)) {
        let joined: String = tokenize(s).unwrap().into_iter().map(|t| t.text).collect();
        assert_eq!(joined, s);
    }
}

#[test]
fn serialize_round_trip_is_isomorphic() {
    for s in corpus_lines(VALID).chain(corpus_lines(ZINC).take(1000)) {
        let g = parse_smiles(s).unwrap();
        let out = serialize(&g).unwrap();
        let back = parse_smiles(&out).unwrap_or_else(|e| panic!("{s} -> {out}: {e}"));
        assert!(common::isomorphic(&g, &back), "{s} -> {out}");
    }
}

#[test]
fn canonical_round_trip_is_isomorphic_and_idempotent() {
    for s in corpus_lines(VALID).chain(corpus_lines(ZINC).take(300)) {
        let g = parse_smiles(s).unwrap();
        let c = canonicalize(&g).unwrap();
        let back = parse_smiles(&c).unwrap();
        assert!(common::isomorphic(&g, &back), "{s} -> {c}");
        assert_eq!(canonicalize(&back).unwrap(), c, "{s}");
    }
}

#[test]
fn canonical_form_is_permutation_invariant_on_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in corpus_lines(VALID).chain(corpus_lines(ZINC).take(100)) {
        let g = parse_smiles(s).unwrap();
        let reference = canonicalize(&g).unwrap();
        for _ in 0..5 {
            let perm = common::random_permutation(g.atom_count(), &mut rng);
            let shuffled = g.permuted(&perm);
            assert!(common::isomorphic(&g, &shuffled));
            assert_eq!(canonicalize(&shuffled).unwrap(), reference, "{s}");
        }
    }
}

#[test]
fn canonical_form_is_permutation_invariant_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2016);
    for _ in 0..20 {
        let g = common::random_molecule(20, &mut rng);
        let reference = canonicalize(&g).unwrap();
        for _ in 0..100 {
            let perm = common::random_permutation(g.atom_count(), &mut rng);
            assert_eq!(canonicalize(&g.permuted(&perm)).unwrap(), reference);
        }
    }
}

#[test]
fn different_molecules_get_different_canonical_forms() {
    let mut seen = std::collections::HashMap::new();
    for s in corpus_lines(ZINC).take(2000) {
        let c = canonicalize(&parse_smiles(s).unwrap()).unwrap();
        if let Some(prev) = seen.insert(c.clone(), s) {
            let a = parse_smiles(prev).unwrap();
            let b = parse_smiles(s).unwrap();
            assert!(common::isomorphic(&a, &b), "{prev} and {s} share {c}");
        }
    }
}

#[test]
fn naphthalene_rings_match_cycle_enumeration() {
    let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
    let all = common::all_simple_cycles(&g);
    let mut sizes: Vec<usize> = all.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![6, 6, 10]);
    assert_eq!(ring_sizes(&g), vec![6, 6]);
}

fn distinct_ring_sizes_agree(g: &molvae::smiles::MolGraph) {
    let found: BTreeSet<usize> = ring_sizes(g).into_iter().collect();
    let oracle: BTreeSet<usize> = common::shortest_cycle_per_bond(g).into_iter().flatten().collect();
    assert_eq!(found, oracle);
    for ring in rings(g) {
        let n = ring.len();
        assert_eq!(ring.bonds.len(), n);
        let atoms: BTreeSet<_> = ring.atoms.iter().collect();
        assert_eq!(atoms.len(), n, "ring visits an atom twice");
    }
}

#[test]
fn ring_sizes_match_brute_force_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let n = rand::Rng::random_range(&mut rng, 3..=12);
        let extra = rand::Rng::random_range(&mut rng, 0..=5);
        distinct_ring_sizes_agree(&common::random_carbon_graph(n, extra, &mut rng));
    }
    for s in corpus_lines(VALID) {
        let g = parse_smiles(s).unwrap();
        if g.atom_count() <= 12 {
            distinct_ring_sizes_agree(&g);
        }
    }
}
