use serde::{Deserialize, Serialize};

use super::graph::{BondKind, Element, MolGraph, ValenceTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    ValenceExceeded,
    AromaticOutsideRing,
    KekulizationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub atom: Option<usize>,
    pub bond: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }
}

/// Check valences against the shipped table and that aromatic systems are
/// rings admitting a Kekulé structure.
pub fn validate(g: &MolGraph) -> ValidationReport {
    validate_with(g, ValenceTable::default_table())
}

pub fn validate_with(g: &MolGraph, table: &ValenceTable) -> ValidationReport {
    let mut violations = Vec::new();
    let mut needs_pi = vec![false; g.atom_count()];

    for (i, atom) in g.atoms().iter().enumerate() {
        let (aromatic_bonds, other) = g.bond_order_split(i);
        if atom.aromatic && aromatic_bonds < 2 {
            violations.push(Violation {
                code: ViolationCode::AromaticOutsideRing,
                atom: Some(i),
                bond: None,
                message: format!(
                    "aromatic {} at atom {i} has {aromatic_bonds} aromatic ring bonds",
                    atom.element
                ),
            });
            continue;
        }
        let Some(allowed) = table.allowed(atom.element, atom.charge) else {
            continue;
        };
        let max = *allowed.last().expect("table rows are non-empty") as u32;
        let h = g.hydrogen_count(i) as u32;
        let sigma = aromatic_bonds as u32 + other as u32 + h;

        let exceeded = if !atom.aromatic {
            sigma > max
        } else if atom.hydrogens.is_none() && matches!(atom.element, Element::C | Element::B) {
            let pi = !g.has_exocyclic_multiple_bond(i);
            needs_pi[i] = pi;
            sigma + u32::from(pi) > max
        } else {
            let fits = |v: u32| allowed.iter().any(|&a| a as u32 == v);
            if fits(sigma) {
                false
            } else if fits(sigma + 1) {
                needs_pi[i] = true;
                false
            } else {
                true
            }
        };
        if exceeded {
            violations.push(Violation {
                code: ViolationCode::ValenceExceeded,
                atom: Some(i),
                bond: None,
                message: format!(
                    "{}{} at atom {i} exceeds allowed valence {:?}",
                    atom.element,
                    charge_suffix(atom.charge),
                    allowed
                ),
            });
        }
    }

    if violations.is_empty() {
        if let Some(atom) = kekule_failure(g, &needs_pi) {
            violations.push(Violation {
                code: ViolationCode::KekulizationFailed,
                atom: Some(atom),
                bond: None,
                message: format!("aromatic system containing atom {atom} has no Kekulé structure"),
            });
        }
    }
    ValidationReport::from_violations(violations)
}

fn charge_suffix(charge: i8) -> String {
    match charge {
        0 => String::new(),
        c if c > 0 => format!("{c:+}"),
        c => c.to_string(),
    }
}

const KEKULE_SEARCH_LIMIT: usize = 200_000;

/// Find an atom whose aromatic system has no perfect matching of the atoms
/// that need a ring double bond. Returns `None` when every system matches.
fn kekule_failure(g: &MolGraph, needs_pi: &[bool]) -> Option<usize> {
    let n = g.atom_count();
    let mut mate = vec![usize::MAX; n];
    let needy: Vec<usize> = (0..n).filter(|&i| needs_pi[i]).collect();
    let candidates = |v: usize| -> Vec<usize> {
        g.neighbors(v)
            .iter()
            .filter(|&&(w, b)| needs_pi[w] && g.bond(b).kind == BondKind::Aromatic)
            .map(|&(w, _)| w)
            .collect()
    };
    let adjacency: Vec<Vec<usize>> = (0..n).map(candidates).collect();

    fn search(
        adjacency: &[Vec<usize>],
        needy: &[usize],
        mate: &mut [usize],
        budget: &mut usize,
    ) -> Result<bool, ()> {
        if *budget == 0 {
            return Err(());
        }
        *budget -= 1;
        // most constrained unmatched atom first
        let mut pick: Option<(usize, usize)> = None;
        for &v in needy {
            if mate[v] != usize::MAX {
                continue;
            }
            let free = adjacency[v].iter().filter(|&&w| mate[w] == usize::MAX).count();
            if free == 0 {
                return Ok(false);
            }
            if pick.is_none_or(|(_, best)| free < best) {
                pick = Some((v, free));
            }
        }
        let Some((v, _)) = pick else {
            return Ok(true);
        };
        for &w in &adjacency[v] {
            if mate[w] != usize::MAX {
                continue;
            }
            mate[v] = w;
            mate[w] = v;
            if search(adjacency, needy, mate, budget)? {
                return Ok(true);
            }
            mate[v] = usize::MAX;
            mate[w] = usize::MAX;
        }
        Ok(false)
    }

    let mut budget = KEKULE_SEARCH_LIMIT;
    match search(&adjacency, &needy, &mut mate, &mut budget) {
        Ok(true) | Err(()) => None,
        Ok(false) => {
            let unmatched = needy.iter().copied().find(|&v| {
                adjacency[v].is_empty() || adjacency[v].iter().all(|&w| mate[w] != usize::MAX)
            });
            Some(unmatched.unwrap_or(needy[0]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn report(s: &str) -> ValidationReport {
        validate(&parse_smiles(s).unwrap())
    }

    #[test]
    fn carbon_dioxide_is_valid() {
        assert!(report("O=C=O").valid);
    }

    #[test]
    fn pentavalent_carbon() {
        let r = report("C(C)(C)(C)(C)C");
        assert!(!r.valid);
        assert_eq!(r.violations[0].code, ViolationCode::ValenceExceeded);
        assert_eq!(r.violations[0].atom, Some(0));
    }

    #[test]
    fn difluorine_double_bond() {
        let r = report("F=F");
        assert!(!r.valid);
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn valid_aromatics() {
        for s in [
            "c1ccccc1",
            "c1ccc2ccccc2c1",
            "c1ccncc1",
            "c1cc[nH]c1",
            "Cn1cccc1",
            "c1ccoc1",
            "c1ccsc1",
            "O=c1cccc[nH]1",
            "c1ccc2[nH]ccc2c1",
            "C[n+]1ccccc1",
            "[O-][n+]1ccccc1",
            "c1ccc(-c2ccccc2)cc1",
            "c1cnc2[nH]cnc2c1",
            "CCCS(=O)c1ccc2[nH]c(=NC(=O)OC)[nH]c2c1",
            "Cc1ccc(cc1)S(=O)(=O)N",
            "c1ccc2c(c1)ccc1ccccc12",
        ] {
            let r = report(s);
            assert!(r.valid, "{s}: {:?}", r.violations);
        }
    }

    #[test]
    fn invalid_aromatics() {
        let cases = [
            ("c1cccc1", ViolationCode::KekulizationFailed),
            ("c1ccccc1c", ViolationCode::AromaticOutsideRing),
            ("c1cc[nH]cc1", ViolationCode::KekulizationFailed),
            ("c1ccnc1", ViolationCode::KekulizationFailed),
            ("Cc1(C)ccccc1", ViolationCode::ValenceExceeded),
            ("c1cco(C)c1", ViolationCode::ValenceExceeded),
        ];
        for (s, code) in cases {
            let r = report(s);
            assert!(!r.valid, "{s}");
            assert_eq!(r.violations[0].code, code, "{s}");
        }
    }

    #[test]
    fn charged_and_bracket_valences() {
        assert!(report("[NH4+]").valid);
        assert!(report("C[N+](C)(C)C").valid);
        assert!(report("CC(=O)[O-]").valid);
        assert!(report("[Na+].[Cl-]").valid);
        assert!(!report("[CH5]").valid);
        assert!(!report("C[N+](C)(C)(C)C").valid);
        assert!(report("CS(=O)(=O)C").valid);
        assert!(report("OP(=O)(O)O").valid);
        assert!(!report("ClCl(Cl)").valid);
    }

    #[test]
    fn valid_iff_no_violations() {
        for s in ["CC", "F=F", "c1cccc1"] {
            let r = report(s);
            assert_eq!(r.valid, r.violations.is_empty());
        }
    }
}
