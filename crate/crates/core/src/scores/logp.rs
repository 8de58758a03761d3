//! Atom-contribution logP.
//!
//! The table is a CSV file with the columns
//! `class,element,aromatic,charge,heavy_degree,hydrogens,hetero_neighbors,aromatic_neighbors,max_bond,contribution,description`.
//! Each structural column holds `*` (anything), an exact integer `n`, or
//! `n+` (at least `n`). `element` is a symbol or `*`; `aromatic` is `yes`,
//! `no` or `*`. Rows are tried top to bottom and the first match wins.
//!
//! Per-atom features:
//! - `heavy_degree`: neighbours other than hydrogen
//! - `hydrogens`: implicit plus explicit hydrogens
//! - `hetero_neighbors`: heavy neighbours that are not carbon
//! - `aromatic_neighbors`: neighbours flagged aromatic
//! - `max_bond`: highest order among non-aromatic bonds, 1 if there are none
//!
//! Hydrogens carry no contribution of their own.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::smiles::{BondKind, Element, MolGraph};

use super::ScoreError;

const DEFAULT_TABLE: &str = include_str!("../../data/logp_contrib.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Count {
    Any,
    Exactly(u32),
    AtLeast(u32),
}

impl Count {
    fn parse(field: &str) -> Option<Count> {
        let f = field.trim();
        if f == "*" {
            return Some(Count::Any);
        }
        if let Some(n) = f.strip_suffix('+') {
            return n.parse().ok().map(Count::AtLeast);
        }
        f.parse().ok().map(Count::Exactly)
    }

    fn matches(self, v: u32) -> bool {
        match self {
            Count::Any => true,
            Count::Exactly(n) => v == n,
            Count::AtLeast(n) => v >= n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomPattern {
    pub class: String,
    element: Option<Element>,
    aromatic: Option<bool>,
    charge: Option<i8>,
    heavy_degree: Count,
    hydrogens: Count,
    hetero_neighbors: Count,
    aromatic_neighbors: Count,
    max_bond: Count,
    pub contribution: f64,
    pub description: String,
}

/// Local environment of one atom, as seen by the pattern columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomFeatures {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    pub heavy_degree: u32,
    pub hydrogens: u32,
    pub hetero_neighbors: u32,
    pub aromatic_neighbors: u32,
    pub max_bond: u32,
}

impl AtomFeatures {
    pub fn of(g: &MolGraph, atom: usize) -> AtomFeatures {
        let a = g.atom(atom);
        let mut f = AtomFeatures {
            element: a.element,
            aromatic: a.aromatic,
            charge: a.charge,
            heavy_degree: 0,
            hydrogens: u32::from(g.hydrogen_count(atom)),
            hetero_neighbors: 0,
            aromatic_neighbors: 0,
            max_bond: 1,
        };
        for &(nbr, b) in g.neighbors(atom) {
            let na = g.atom(nbr);
            if na.element == Element::H {
                f.hydrogens += 1;
            } else {
                f.heavy_degree += 1;
                if na.element != Element::C {
                    f.hetero_neighbors += 1;
                }
            }
            if na.aromatic {
                f.aromatic_neighbors += 1;
            }
            let kind = g.bond(b).kind;
            if kind != BondKind::Aromatic {
                f.max_bond = f.max_bond.max(u32::from(kind.order()));
            }
        }
        f
    }
}

impl AtomPattern {
    pub fn matches(&self, f: &AtomFeatures) -> bool {
        self.element.is_none_or(|e| e == f.element)
            && self.aromatic.is_none_or(|a| a == f.aromatic)
            && self.charge.is_none_or(|c| c == f.charge)
            && self.heavy_degree.matches(f.heavy_degree)
            && self.hydrogens.matches(f.hydrogens)
            && self.hetero_neighbors.matches(f.hetero_neighbors)
            && self.aromatic_neighbors.matches(f.aromatic_neighbors)
            && self.max_bond.matches(f.max_bond)
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    class: String,
    element: String,
    aromatic: String,
    charge: String,
    heavy_degree: String,
    hydrogens: String,
    hetero_neighbors: String,
    aromatic_neighbors: String,
    max_bond: String,
    contribution: f64,
    description: String,
}

/// Ordered atom-class table.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomContribTable {
    patterns: Vec<AtomPattern>,
}

impl AtomContribTable {
    pub fn from_csv(text: &str) -> Result<Self, ScoreError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut patterns = Vec::new();
        for (i, rec) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let bad = |column: &str| ScoreError::Table {
                line,
                message: format!("bad value in column {column}"),
            };
            let row = rec.map_err(|e| ScoreError::Table { line, message: e.to_string() })?;
            let element = match row.element.trim() {
                "*" => None,
                s => Some(Element::from_symbol(s).ok_or_else(|| bad("element"))?),
            };
            let aromatic = match row.aromatic.trim() {
                "*" => None,
                "yes" => Some(true),
                "no" => Some(false),
                _ => return Err(bad("aromatic")),
            };
            let charge = match row.charge.trim() {
                "*" => None,
                s => Some(s.parse().map_err(|_| bad("charge"))?),
            };
            let count = |s: &str, col: &str| Count::parse(s).ok_or_else(|| bad(col));
            patterns.push(AtomPattern {
                class: row.class,
                element,
                aromatic,
                charge,
                heavy_degree: count(&row.heavy_degree, "heavy_degree")?,
                hydrogens: count(&row.hydrogens, "hydrogens")?,
                hetero_neighbors: count(&row.hetero_neighbors, "hetero_neighbors")?,
                aromatic_neighbors: count(&row.aromatic_neighbors, "aromatic_neighbors")?,
                max_bond: count(&row.max_bond, "max_bond")?,
                contribution: row.contribution,
                description: row.description,
            });
        }
        Ok(AtomContribTable { patterns })
    }

    /// The table shipped with the crate.
    pub fn default_table() -> &'static AtomContribTable {
        static TABLE: OnceLock<AtomContribTable> = OnceLock::new();
        TABLE.get_or_init(|| AtomContribTable::from_csv(DEFAULT_TABLE).expect("bundled logP table"))
    }

    pub fn patterns(&self) -> &[AtomPattern] {
        &self.patterns
    }

    /// First pattern matching the atom.
    pub fn classify(&self, g: &MolGraph, atom: usize) -> Result<&AtomPattern, ScoreError> {
        let f = AtomFeatures::of(g, atom);
        self.patterns
            .iter()
            .find(|p| p.matches(&f))
            .ok_or(ScoreError::NoPatternMatch { atom })
    }

    /// Same table with every contribution replaced by `value`.
    pub fn with_constant(&self, value: f64) -> AtomContribTable {
        let mut t = self.clone();
        for p in &mut t.patterns {
            p.contribution = value;
        }
        t
    }
}

/// Sum of per-atom contributions. Explicit hydrogen atoms contribute nothing.
pub fn logp(g: &MolGraph, table: &AtomContribTable) -> Result<f64, ScoreError> {
    let mut total = 0.0;
    for i in 0..g.atom_count() {
        if g.atom(i).element == Element::H {
            continue;
        }
        total += table.classify(g, i)?.contribution;
    }
    Ok(total)
}
