//! Smallest-set-of-smallest-rings style ring perception.

use std::collections::{BTreeSet, VecDeque};

use super::graph::MolGraph;

/// A ring as an ordered atom cycle plus the bonds that close it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// For every ring bond, the shortest cycle through it (BFS between its ends
/// with the bond removed), deduplicated by bond set. Rings are ordered by
/// size, then by their sorted bond list.
pub fn rings(g: &MolGraph) -> Vec<Ring> {
    let in_ring = g.ring_bonds();
    let mut seen: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
    let mut out = Vec::new();
    for (bond_idx, bond) in g.bonds().iter().enumerate() {
        if !in_ring[bond_idx] {
            continue;
        }
        let Some(path) = shortest_path_avoiding(g, bond.a, bond.b, bond_idx) else {
            continue;
        };
        let mut bonds: Vec<usize> = path
            .windows(2)
            .map(|w| g.bond_between(w[0], w[1]).expect("path follows bonds"))
            .collect();
        bonds.push(bond_idx);
        let mut key = bonds.clone();
        key.sort_unstable();
        if seen.insert((key.len(), key)) {
            out.push(Ring { atoms: path, bonds });
        }
    }
    out.sort_by(|a, b| {
        let mut ka = a.bonds.clone();
        let mut kb = b.bonds.clone();
        ka.sort_unstable();
        kb.sort_unstable();
        (a.len(), ka).cmp(&(b.len(), kb))
    });
    out
}

/// Sizes of [`rings`], ascending.
pub fn ring_sizes(g: &MolGraph) -> Vec<usize> {
    rings(g).iter().map(Ring::len).collect()
}

fn shortest_path_avoiding(g: &MolGraph, from: usize, to: usize, skip: usize) -> Option<Vec<usize>> {
    let n = g.atom_count();
    let mut parent = vec![usize::MAX; n];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &(w, b) in g.neighbors(v) {
            if b != skip && parent[w] == usize::MAX {
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn sizes(s: &str) -> Vec<usize> {
        ring_sizes(&parse_smiles(s).unwrap())
    }

    #[test]
    fn simple_cases() {
        assert_eq!(sizes("c1ccccc1"), vec![6]);
        assert!(sizes("CCO").is_empty());
        assert_eq!(sizes("C1CCCCCCC1"), vec![8]);
        assert_eq!(sizes("C1CC1CC1CCC1"), vec![3, 4]);
    }

    #[test]
    fn naphthalene_has_two_six_rings() {
        assert_eq!(sizes("c1ccc2ccccc2c1"), vec![6, 6]);
    }

    #[test]
    fn spiro_and_bridged() {
        assert_eq!(sizes("C1CCC2(CC1)CCC2"), vec![4, 6]);
        // norbornane: two five-membered rings
        assert_eq!(sizes("C1CC2CCC1C2"), vec![5, 5]);
    }

    #[test]
    fn ring_atoms_form_a_closed_walk() {
        let g = parse_smiles("c1ccc2c(c1)ccc1ccccc12").unwrap();
        for ring in rings(&g) {
            for (i, &a) in ring.atoms.iter().enumerate() {
                let b = ring.atoms[(i + 1) % ring.len()];
                assert!(g.bond_between(a, b).is_some());
            }
        }
    }
}
