use std::fmt::Write as _;

use thiserror::Error;

use super::graph::{BondKind, MolGraph};
use super::validate::{validate, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WriteError {
    #[error("graph fails validation: {}", .0.violations.first().map(|v| v.message.as_str()).unwrap_or(""))]
    InvalidGraph(ValidationReport),
}

/// Emit a SMILES string for a valid graph, walking atoms in index order.
/// `parse(serialize(g))` is isomorphic to `g`.
pub fn serialize(g: &MolGraph) -> Result<String, WriteError> {
    let report = validate(g);
    if !report.valid {
        return Err(WriteError::InvalidGraph(report));
    }
    let n = g.atom_count();
    let ranks: Vec<usize> = (0..n).map(|i| n - i).collect();
    Ok(write_ranked(g, &ranks))
}

fn atom_text(g: &MolGraph, i: usize) -> String {
    let atom = g.atom(i);
    let h = g.hydrogen_count(i);
    let organic = atom.element.is_organic_subset()
        && atom.charge == 0
        && atom.isotope.is_none()
        && (!atom.aromatic || atom.element.has_aromatic_form())
        && h == g.default_hydrogens(i);
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if organic {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        let _ = write!(s, "{iso}");
    }
    s.push_str(&symbol);
    match h {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c => {
            let _ = write!(s, "{c:+}");
        }
    }
    s.push(']');
    s
}

fn bond_text(g: &MolGraph, bond: usize) -> &'static str {
    let b = g.bond(bond);
    match b.kind {
        BondKind::Single if g.atom(b.a).aromatic && g.atom(b.b).aromatic => "-",
        BondKind::Single | BondKind::Aromatic => "",
        BondKind::Double => "=",
        BondKind::Triple => "#",
    }
}

fn ring_label(d: usize) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d:02}")
    }
}

/// Depth-first writeout driven by a total ranking of atoms: each component
/// starts at its highest-ranked atom and higher-ranked neighbors are visited
/// first. `ranks` must be pairwise distinct.
pub(crate) fn write_ranked(g: &MolGraph, ranks: &[usize]) -> String {
    let n = g.atom_count();
    let ordered_neighbors: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|v| {
            let mut nb = g.neighbors(v).to_vec();
            nb.sort_by(|a, b| ranks[b.0].cmp(&ranks[a.0]));
            nb
        })
        .collect();

    // Pass 1: spanning forest and ring-closure bonds.
    let mut visited = vec![false; n];
    let mut is_tree = vec![false; g.bond_count()];
    let mut is_ring = vec![false; g.bond_count()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    // ring bond events per atom: (bond, partner)
    let mut openings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];

    let mut starts: Vec<usize> = g
        .components()
        .into_iter()
        .map(|c| *c.iter().max_by_key(|&&a| ranks[a]).expect("components are non-empty"))
        .collect();
    starts.sort_by(|a, b| ranks[*b].cmp(&ranks[*a]));

    for &start in &starts {
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        visited[start] = true;
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            if *cursor == ordered_neighbors[v].len() {
                stack.pop();
                continue;
            }
            let (w, b) = ordered_neighbors[v][*cursor];
            *cursor += 1;
            if is_tree[b] || is_ring[b] {
                continue;
            }
            if visited[w] {
                is_ring[b] = true;
                openings[w].push((b, v));
                closings[v].push((b, w));
            } else {
                is_tree[b] = true;
                visited[w] = true;
                children[v].push((w, b));
                stack.push((w, 0));
            }
        }
    }

    // Pass 2: emit.
    let mut out = String::new();
    let mut digit_of_bond: Vec<usize> = vec![0; g.bond_count()];
    let mut digits_in_use: Vec<bool> = vec![false; 100];

    for (k, &start) in starts.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        enum Step {
            Visit(usize, Option<usize>),
            Open,
            Close,
        }
        let mut stack = vec![Step::Visit(start, None)];
        while let Some(step) = stack.pop() {
            let (v, incoming) = match step {
                Step::Open => {
                    out.push('(');
                    continue;
                }
                Step::Close => {
                    out.push(')');
                    continue;
                }
                Step::Visit(v, incoming) => (v, incoming),
            };
            if let Some(b) = incoming {
                out.push_str(bond_text(g, b));
            }
            out.push_str(&atom_text(g, v));

            let mut closes = closings[v].clone();
            closes.sort_by(|a, b| ranks[b.1].cmp(&ranks[a.1]));
            for (b, _) in closes {
                let d = digit_of_bond[b];
                out.push_str(&ring_label(d));
                digits_in_use[d] = false;
            }
            let mut opens = openings[v].clone();
            opens.sort_by(|a, b| ranks[b.1].cmp(&ranks[a.1]));
            for (b, _) in opens {
                let d = (1..100)
                    .find(|&d| !digits_in_use[d])
                    .expect("fewer than 99 simultaneously open rings");
                digits_in_use[d] = true;
                digit_of_bond[b] = d;
                out.push_str(bond_text(g, b));
                out.push_str(&ring_label(d));
            }

            let kids = &children[v];
            if let Some((&(last, last_bond), branches)) = kids.split_last() {
                stack.push(Step::Visit(last, Some(last_bond)));
                for &(w, b) in branches.iter().rev() {
                    stack.push(Step::Close);
                    stack.push(Step::Visit(w, Some(b)));
                    stack.push(Step::Open);
                }
            }
        }
    }
    out
}
