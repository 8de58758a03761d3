//! Attributed molecular graph and element data.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

const SYMBOLS: [&str; 55] = [
    "", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe",
];

/// A chemical element, stored by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .skip(1)
            .position(|s| *s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        ((1..SYMBOLS.len()).contains(&(z as usize))).then_some(Element(z))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize]
    }

    /// Member of the SMILES organic subset (may be written without brackets).
    pub fn is_organic_subset(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
    }

    /// Elements that have a lowercase aromatic spelling outside brackets.
    pub fn has_aromatic_form(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16)
    }

    pub fn is_halogen(self) -> bool {
        matches!(self.0, 9 | 17 | 35 | 53)
    }

    /// Anything other than carbon and hydrogen.
    pub fn is_hetero(self) -> bool {
        !matches!(self.0, 1 | 6)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chirality {
    CounterClockwise,
    Clockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondKind {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondKind {
    /// Integer order used in valence sums; aromatic bonds report 1.
    pub fn order(self) -> u8 {
        match self {
            BondKind::Single | BondKind::Aromatic => 1,
            BondKind::Double => 2,
            BondKind::Triple => 3,
        }
    }

    pub fn is_aromatic(self) -> bool {
        self == BondKind::Aromatic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    /// Hydrogen count written inside brackets; `None` for organic-subset
    /// atoms whose hydrogens are implicit.
    pub hydrogens: Option<u8>,
    pub isotope: Option<u16>,
    /// Annotation only; never used by validation, scoring or canonical output.
    pub chirality: Option<Chirality>,
}

impl Atom {
    pub fn organic(element: Element, aromatic: bool) -> Self {
        Atom {
            element,
            charge: 0,
            aromatic,
            hydrogens: None,
            isotope: None,
            chirality: None,
        }
    }

    pub fn bracket(element: Element, aromatic: bool, hydrogens: u8, charge: i8) -> Self {
        Atom {
            element,
            charge,
            aromatic,
            hydrogens: Some(hydrogens),
            isotope: None,
            chirality: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
    /// `/` or `\` annotation; ignored everywhere except round-tripping.
    pub direction: Option<BondDirection>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("atom index {0} out of range")]
    AtomOutOfRange(usize),
    #[error("bond from atom {0} to itself")]
    SelfLoop(usize),
    #[error("atoms {0} and {1} are already bonded")]
    DuplicateBond(usize, usize),
    #[error("aromatic bond between {0} and {1} joins a non-aromatic atom")]
    AromaticBondOnAliphaticAtom(usize, usize),
}

/// Undirected molecular graph with atoms as nodes and bonds as edges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, kind: BondKind) -> Result<usize, GraphError> {
        self.add_bond_with_direction(a, b, kind, None)
    }

    pub fn add_bond_with_direction(
        &mut self,
        a: usize,
        b: usize,
        kind: BondKind,
        direction: Option<BondDirection>,
    ) -> Result<usize, GraphError> {
        let n = self.atoms.len();
        for idx in [a, b] {
            if idx >= n {
                return Err(GraphError::AtomOutOfRange(idx));
            }
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.bond_between(a, b).is_some() {
            return Err(GraphError::DuplicateBond(a, b));
        }
        if kind.is_aromatic() && !(self.atoms[a].aromatic && self.atoms[b].aromatic) {
            return Err(GraphError::AromaticBondOnAliphaticAtom(a, b));
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond { a, b, kind, direction });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn bond(&self, idx: usize) -> &Bond {
        &self.bonds[idx]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs in insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, bond)| *bond)
    }

    pub(crate) fn set_bond_kind(&mut self, bond: usize, kind: BondKind) {
        self.bonds[bond].kind = kind;
    }


    /// Hydrogens the atom would carry if written in organic-subset form.
    pub fn default_hydrogens(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let table = ValenceTable::default_table();
        let Some(allowed) = table.allowed(a.element, a.charge) else {
            return 0;
        };
        let (aromatic_bonds, other) = self.bond_order_split(atom);
        if !a.aromatic {
            let used = other as u32;
            return allowed
                .iter()
                .find(|&&v| v as u32 >= used)
                .map(|&v| (v as u32 - used) as u8)
                .unwrap_or(0);
        }
        // Only aromatic carbon and boron take implicit hydrogens; their ring
        // contributes one pi bond unless an exocyclic multiple bond supplies it.
        if matches!(a.element, Element::C | Element::B) {
            let pi = u32::from(!self.has_exocyclic_multiple_bond(atom));
            let used = aromatic_bonds as u32 + other as u32 + pi;
            return allowed
                .iter()
                .find(|&&v| v as u32 >= used)
                .map(|&v| (v as u32 - used) as u8)
                .unwrap_or(0);
        }
        0
    }

    /// Total hydrogens attached to an atom: explicit count in brackets or
    /// the implicit count otherwise.
    pub fn hydrogen_count(&self, atom: usize) -> u8 {
        match self.atoms[atom].hydrogens {
            Some(h) => h,
            None => self.default_hydrogens(atom),
        }
    }

    /// `(number of aromatic bonds, sum of non-aromatic bond orders)`.
    pub fn bond_order_split(&self, atom: usize) -> (u8, u8) {
        let mut aromatic = 0u8;
        let mut other = 0u8;
        for &(_, b) in &self.adjacency[atom] {
            match self.bonds[b].kind {
                BondKind::Aromatic => aromatic += 1,
                k => other += k.order(),
            }
        }
        (aromatic, other)
    }

    pub fn has_exocyclic_multiple_bond(&self, atom: usize) -> bool {
        self.adjacency[atom]
            .iter()
            .any(|&(_, b)| matches!(self.bonds[b].kind, BondKind::Double | BondKind::Triple))
    }

    /// Relabel atoms so that old atom `i` becomes new atom `perm[i]`.
    /// Bonds are re-inserted in order of their new (min, max) endpoints.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms: Vec<Option<Atom>> = vec![None; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = Some(self.atoms[old].clone());
        }
        let mut out = MolGraph::new();
        for a in atoms {
            out.add_atom(a.expect("perm is a permutation"));
        }
        let mut bonds: Vec<_> = self
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (perm[b.a], perm[b.b]);
                (x.min(y), x.max(y), b.kind, b.direction)
            })
            .collect();
        bonds.sort_by_key(|b| (b.0, b.1));
        for (a, b, kind, dir) in bonds {
            out.add_bond_with_direction(a, b, kind, dir)
                .expect("permutation preserves simple graph");
        }
        out
    }

    /// Connected components as sorted atom index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(a) = stack.pop() {
                comp.push(a);
                for &(nb, _) in &self.adjacency[a] {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Indices of bonds that lie on at least one cycle.
    pub fn ring_bonds(&self) -> Vec<bool> {
        // Bridges via iterative Tarjan low-link; everything else is a ring bond.
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut in_ring = vec![true; self.bonds.len()];
        let mut time = 0usize;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, parent bond, next neighbor cursor)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = time;
            low[root] = time;
            time += 1;
            while let Some(&mut (v, parent_bond, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[v].len() {
                    let (w, b) = self.adjacency[v][*cursor];
                    *cursor += 1;
                    if b == parent_bond {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = time;
                        low[w] = time;
                        time += 1;
                        stack.push((w, b, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            in_ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        in_ring
    }
}

/// Allowed valences per element, loaded from a plain-text table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValenceTable {
    entries: HashMap<Element, Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValenceTableError {
    #[error("line {line}: unknown element {symbol:?}")]
    UnknownElement { line: usize, symbol: String },
    #[error("line {line}: bad valence {value:?}")]
    BadValence { line: usize, value: String },
    #[error("line {line}: element has no valences")]
    Empty { line: usize },
}

const DEFAULT_VALENCE_TABLE: &str = include_str!("../../data/valence.txt");

impl ValenceTable {
    pub fn parse(text: &str) -> Result<Self, ValenceTableError> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let symbol = fields.next().unwrap_or_default();
            let element = Element::from_symbol(symbol).ok_or_else(|| {
                ValenceTableError::UnknownElement {
                    line: i + 1,
                    symbol: symbol.to_string(),
                }
            })?;
            let mut valences = fields
                .map(|f| {
                    f.parse::<u8>().map_err(|_| ValenceTableError::BadValence {
                        line: i + 1,
                        value: f.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if valences.is_empty() {
                return Err(ValenceTableError::Empty { line: i + 1 });
            }
            valences.sort_unstable();
            entries.insert(element, valences);
        }
        Ok(ValenceTable { entries })
    }

    pub fn default_table() -> &'static ValenceTable {
        static TABLE: OnceLock<ValenceTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ValenceTable::parse(DEFAULT_VALENCE_TABLE).expect("shipped valence table parses")
        })
    }

    /// Allowed valences for an element carrying `charge`, using the
    /// isoelectronic neighbor's row for charged atoms.
    pub fn allowed(&self, element: Element, charge: i8) -> Option<&[u8]> {
        let z = element.atomic_number() as i16 - charge as i16;
        let shifted = u8::try_from(z).ok().and_then(Element::from_atomic_number)?;
        self.entries.get(&shifted).map(Vec::as_slice)
    }
}
