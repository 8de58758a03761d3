//! Canonical SMILES via iterative invariant refinement.
//!
//! Atoms start from an invariant of (element, charge, aromaticity,
//! hydrogens, degree, isotope) and are refined by the multiset of neighbor
//! ranks until stable. Remaining ties are broken by individualizing each
//! member of the first tied class in turn and keeping the lexicographically
//! smallest output. Once `LEAF_BUDGET` complete rankings have been written the
//! search only follows the lowest-index member, so the result is canonical
//! whenever tied atoms are symmetry-equivalent or the search completes.

use super::graph::MolGraph;
use super::validate::validate;
use super::write::{write_ranked, WriteError};

const LEAF_BUDGET: usize = 256;

pub fn canonicalize(g: &MolGraph) -> Result<String, WriteError> {
    let report = validate(g);
    if !report.valid {
        return Err(WriteError::InvalidGraph(report));
    }
    Ok(canonical_string(g))
}

/// Canonical ranks (0-based, distinct) in the order used by [`canonicalize`].
pub fn canonical_ranks(g: &MolGraph) -> Vec<usize> {
    best_leaf(g).map(|(_, r)| r).unwrap_or_default()
}

fn canonical_string(g: &MolGraph) -> String {
    best_leaf(g).map(|(s, _)| s).unwrap_or_default()
}

fn best_leaf(g: &MolGraph) -> Option<(String, Vec<usize>)> {
    if g.is_empty() {
        return None;
    }
    let mut search = Search {
        g,
        leaves: 0,
        best: None,
    };
    search.explore(refine(g, initial_ranks(g)));
    search.best
}

struct Search<'a> {
    g: &'a MolGraph,
    leaves: usize,
    best: Option<(String, Vec<usize>)>,
}

impl Search<'_> {
    fn explore(&mut self, ranks: Vec<usize>) {
        let n = ranks.len();
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let Some(cell) = (0..n).find(|&r| counts[r] > 1) else {
            self.leaves += 1;
            let s = write_ranked(self.g, &ranks);
            if self.best.as_ref().is_none_or(|(b, _)| s < *b) {
                self.best = Some((s, ranks));
            }
            return;
        };
        let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == cell).collect();
        for (k, &chosen) in members.iter().enumerate() {
            if k > 0 && self.leaves >= LEAF_BUDGET {
                break;
            }
            let keys: Vec<(usize, bool)> = ranks
                .iter()
                .enumerate()
                .map(|(i, &r)| (r, i != chosen))
                .collect();
            self.explore(refine(self.g, dense_ranks(&keys)));
        }
    }
}

fn initial_ranks(g: &MolGraph) -> Vec<usize> {
    let keys: Vec<_> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            (
                a.element.atomic_number(),
                a.charge,
                a.aromatic,
                g.hydrogen_count(i),
                g.degree(i),
                a.isotope.unwrap_or(0),
            )
        })
        .collect();
    dense_ranks(&keys)
}

/// Replace each key by its position among the sorted distinct keys.
fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..g.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (ranks[w], g.bond(b).kind as u8))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        if class_count(&next) == class_count(&ranks) {
            return next;
        }
        ranks = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn canon(s: &str) -> String {
        canonicalize(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn atom_order_does_not_matter() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("c1ccccc1O"), canon("Oc1ccccc1"));
        assert_eq!(canon("C(=O)(O)C"), canon("CC(O)=O"));
        assert_eq!(canon("[Na+].[Cl-]"), canon("[Cl-].[Na+]"));
    }

    #[test]
    fn bracket_spelling_does_not_matter() {
        assert_eq!(canon("[CH4]"), canon("C"));
        assert_eq!(canon("[CH3][OH]"), canon("CO"));
    }

    #[test]
    fn idempotent() {
        for s in [
            "CC(=O)Oc1ccccc1C(=O)O",
            "c1ccc2ccccc2c1",
            "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
            "C1CC2CCC1C2",
            "C[n+]1ccccc1.[Cl-]",
        ] {
            let once = canon(s);
            assert_eq!(canon(&once), once, "{s}");
        }
    }

    #[test]
    fn distinguishes_isomers() {
        assert_ne!(canon("CCO"), canon("COC"));
        assert_ne!(canon("Cc1ccccc1C"), canon("Cc1cccc(C)c1"));
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(canonicalize(&parse_smiles("F=F").unwrap()).is_err());
    }

    #[test]
    fn ranks_are_a_permutation() {
        let g = parse_smiles("CC(C)(C)c1ccccc1").unwrap();
        let mut r = canonical_ranks(&g);
        r.sort_unstable();
        assert_eq!(r, (0..g.atom_count()).collect::<Vec<_>>());
    }
}
