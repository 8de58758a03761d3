use std::collections::BTreeMap;

use thiserror::Error;

use super::graph::{Atom, BondDirection, BondKind, Chirality, Element, GraphError, MolGraph};
use super::token::{tokenize, Token, TokenKind, TokenizeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("ring closure {label} opened at position {position} is never closed")]
    UnmatchedRingClosure { label: u16, position: usize },
    #[error("unbalanced branch at position {position}")]
    UnbalancedBranch { position: usize },
    #[error("empty branch at position {position}")]
    EmptyBranch { position: usize },
    #[error("bond at position {position} is not between two atoms")]
    BondWithoutAtom { position: usize },
    #[error("ring closure at position {position} does not follow an atom")]
    RingClosureWithoutAtom { position: usize },
    #[error("ring closure {label} at position {position} has conflicting bond symbols")]
    RingBondMismatch { label: u16, position: usize },
    #[error("disconnection at position {position} does not follow an atom")]
    MisplacedDot { position: usize },
    #[error("invalid bracket atom {text:?} at position {position}")]
    InvalidBracketAtom { text: String, position: usize },
    #[error("at position {position}: {source}")]
    Graph {
        position: usize,
        #[source]
        source: GraphError,
    },
    #[error("no atoms")]
    NoAtoms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BondSpec {
    kind: BondKind,
    direction: Option<BondDirection>,
    position: usize,
}

fn bond_spec(token: &Token) -> BondSpec {
    let (kind, direction) = match token.text.as_str() {
        "-" => (BondKind::Single, None),
        "=" => (BondKind::Double, None),
        "#" => (BondKind::Triple, None),
        ":" => (BondKind::Aromatic, None),
        "/" => (BondKind::Single, Some(BondDirection::Up)),
        "\\" => (BondKind::Single, Some(BondDirection::Down)),
        other => unreachable!("tokenizer produced bond {other:?}"),
    };
    BondSpec {
        kind,
        direction,
        position: token.position,
    }
}

fn organic_atom(text: &str) -> Atom {
    let aromatic = text.chars().all(|c| c.is_ascii_lowercase());
    let symbol = if aromatic {
        text.to_ascii_uppercase()
    } else {
        text.to_string()
    };
    let element = Element::from_symbol(&symbol).expect("tokenizer admits organic subset only");
    Atom::organic(element, aromatic)
}

/// Parse the inside of `[...]`: isotope, symbol, chirality, H count, charge, class.
fn bracket_atom(token: &Token) -> Result<Atom, ParseError> {
    let invalid = || ParseError::InvalidBracketAtom {
        text: token.text.clone(),
        position: token.position,
    };
    let inner: Vec<char> = token.text[1..token.text.len() - 1].chars().collect();
    let mut i = 0;

    let digits = |i: &mut usize| -> Option<u32> {
        let start = *i;
        while *i < inner.len() && inner[*i].is_ascii_digit() {
            *i += 1;
        }
        (start < *i).then(|| inner[start..*i].iter().collect::<String>().parse().unwrap())
    };

    let isotope = digits(&mut i).map(|v| u16::try_from(v).map_err(|_| invalid())).transpose()?;

    let first = *inner.get(i).ok_or_else(invalid)?;
    let (element, aromatic) = if first.is_ascii_lowercase() {
        // aromatic: b c n o p s, plus two-letter se / as
        let two: String = inner[i..(i + 2).min(inner.len())].iter().collect();
        if two == "se" || two == "as" {
            i += 2;
            let sym = if two == "se" { "Se" } else { "As" };
            (Element::from_symbol(sym).ok_or_else(invalid)?, true)
        } else {
            i += 1;
            let sym = first.to_ascii_uppercase().to_string();
            let el = Element::from_symbol(&sym).ok_or_else(invalid)?;
            if !el.has_aromatic_form() {
                return Err(invalid());
            }
            (el, true)
        }
    } else if first.is_ascii_uppercase() {
        let two: Option<String> = inner
            .get(i + 1)
            .filter(|c| c.is_ascii_lowercase())
            .map(|c| [first, *c].iter().collect());
        match two.as_deref().and_then(Element::from_symbol) {
            Some(el) => {
                i += 2;
                (el, false)
            }
            None => {
                i += 1;
                (Element::from_symbol(&first.to_string()).ok_or_else(invalid)?, false)
            }
        }
    } else {
        return Err(invalid());
    };

    let mut chirality = None;
    if inner.get(i) == Some(&'@') {
        i += 1;
        chirality = Some(Chirality::CounterClockwise);
        if inner.get(i) == Some(&'@') {
            i += 1;
            chirality = Some(Chirality::Clockwise);
        }
    }

    let mut hydrogens = 0u8;
    if inner.get(i) == Some(&'H') {
        i += 1;
        hydrogens = match digits(&mut i) {
            Some(v) => u8::try_from(v).map_err(|_| invalid())?,
            None => 1,
        };
    }

    let mut charge: i32 = 0;
    if let Some(&sign @ ('+' | '-')) = inner.get(i) {
        let unit = if sign == '+' { 1 } else { -1 };
        i += 1;
        if let Some(v) = digits(&mut i) {
            charge = unit * v as i32;
        } else {
            charge = unit;
            while inner.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }
    let charge = i8::try_from(charge).ok().filter(|c| c.abs() <= 8).ok_or_else(invalid)?;

    if inner.get(i) == Some(&':') {
        i += 1;
        digits(&mut i).ok_or_else(invalid)?;
    }
    if i != inner.len() {
        return Err(invalid());
    }
    Ok(Atom {
        element,
        charge,
        aromatic,
        hydrogens: Some(hydrogens),
        isotope,
        chirality,
    })
}

fn ring_label(token: &Token) -> u16 {
    token.text.trim_start_matches('%').parse().expect("tokenizer checked digits")
}

/// Build a molecular graph from tokens, resolving ring closures and branches.
pub fn parse(tokens: &[Token]) -> Result<MolGraph, ParseError> {
    let mut g = MolGraph::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<BondSpec> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u16, (usize, Option<BondSpec>, usize)> = BTreeMap::new();
    let mut last_kind: Option<TokenKind> = None;

    let graph_err = |position| move |source| ParseError::Graph { position, source };

    for token in tokens {
        let pos = token.position;
        match token.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if token.kind == TokenKind::Atom {
                    organic_atom(&token.text)
                } else {
                    bracket_atom(token)?
                };
                let aromatic = atom.aromatic;
                let idx = g.add_atom(atom);
                match (prev, pending.take()) {
                    (Some(p), spec) => {
                        let (kind, direction) = match spec {
                            Some(s) => (s.kind, s.direction),
                            None if aromatic && g.atom(p).aromatic => (BondKind::Aromatic, None),
                            None => (BondKind::Single, None),
                        };
                        g.add_bond_with_direction(p, idx, kind, direction)
                            .map_err(graph_err(pos))?;
                    }
                    (None, Some(spec)) => {
                        return Err(ParseError::BondWithoutAtom {
                            position: spec.position,
                        })
                    }
                    (None, None) => {}
                }
                prev = Some(idx);
            }
            TokenKind::Bond => {
                if prev.is_none() || pending.is_some() {
                    return Err(ParseError::BondWithoutAtom { position: pos });
                }
                pending = Some(bond_spec(token));
            }
            TokenKind::BranchOpen => {
                let Some(p) = prev else {
                    return Err(ParseError::UnbalancedBranch { position: pos });
                };
                if let Some(spec) = pending {
                    return Err(ParseError::BondWithoutAtom {
                        position: spec.position,
                    });
                }
                branches.push((p, pos));
            }
            TokenKind::BranchClose => {
                if last_kind == Some(TokenKind::BranchOpen) {
                    return Err(ParseError::EmptyBranch { position: pos });
                }
                if let Some(spec) = pending {
                    return Err(ParseError::BondWithoutAtom {
                        position: spec.position,
                    });
                }
                let (p, _) = branches
                    .pop()
                    .ok_or(ParseError::UnbalancedBranch { position: pos })?;
                prev = Some(p);
            }
            TokenKind::RingClosure => {
                let Some(p) = prev else {
                    return Err(ParseError::RingClosureWithoutAtom { position: pos });
                };
                if last_kind == Some(TokenKind::BranchOpen) {
                    return Err(ParseError::RingClosureWithoutAtom { position: pos });
                }
                let label = ring_label(token);
                let spec = pending.take();
                match rings.remove(&label) {
                    Some((open_atom, open_spec, _)) => {
                        let chosen = match (open_spec, spec) {
                            (Some(a), Some(b)) if a.kind != b.kind => {
                                return Err(ParseError::RingBondMismatch {
                                    label,
                                    position: pos,
                                })
                            }
                            (Some(a), _) => Some(a),
                            (None, b) => b,
                        };
                        let (kind, direction) = match chosen {
                            Some(s) => (s.kind, s.direction),
                            None if g.atom(open_atom).aromatic && g.atom(p).aromatic => {
                                (BondKind::Aromatic, None)
                            }
                            None => (BondKind::Single, None),
                        };
                        g.add_bond_with_direction(open_atom, p, kind, direction)
                            .map_err(graph_err(pos))?;
                    }
                    None => {
                        rings.insert(label, (p, spec, pos));
                    }
                }
            }
            TokenKind::Dot => {
                if prev.is_none() || pending.is_some() {
                    return Err(ParseError::MisplacedDot { position: pos });
                }
                if let Some(&(_, open)) = branches.last() {
                    return Err(ParseError::UnbalancedBranch { position: open });
                }
                prev = None;
            }
        }
        last_kind = Some(token.kind);
    }

    if let Some(spec) = pending {
        return Err(ParseError::BondWithoutAtom {
            position: spec.position,
        });
    }
    if let (Some(TokenKind::Dot), Some(last)) = (last_kind, tokens.last()) {
        return Err(ParseError::MisplacedDot {
            position: last.position,
        });
    }
    if let Some(&(_, open)) = branches.last() {
        return Err(ParseError::UnbalancedBranch { position: open });
    }
    if let Some((&label, &(_, _, position))) = rings.iter().next() {
        return Err(ParseError::UnmatchedRingClosure { label, position });
    }
    if g.is_empty() {
        return Err(ParseError::NoAtoms);
    }

    // Implicit bonds between aromatic atoms of different rings (biphenyl
    // written without '-') are single bonds.
    let in_ring = g.ring_bonds();
    let demote: Vec<usize> = (0..g.bond_count())
        .filter(|&b| g.bond(b).kind == BondKind::Aromatic && !in_ring[b])
        .collect();
    for b in demote {
        g.set_bond_kind(b, BondKind::Single);
    }
    Ok(g)
}

/// Tokenize and parse in one step.
pub fn parse_smiles(input: &str) -> Result<MolGraph, ParseError> {
    parse(&tokenize(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bond_count(), 2);
        assert!(g.bonds().iter().all(|b| b.kind == BondKind::Single));
    }

    #[test]
    fn unclosed_ring_is_rejected() {
        assert_eq!(
            parse_smiles("C1CC"),
            Err(ParseError::UnmatchedRingClosure { label: 1, position: 1 })
        );
    }

    #[test]
    fn benzene_ring() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bond_count(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic));
        assert!(g.bonds().iter().all(|b| b.kind == BondKind::Aromatic));
        assert!((0..6).all(|i| g.degree(i) == 2));
        assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn branches_and_bonds() {
        let g = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(g.degree(1), 3);
        assert_eq!(g.bond(g.bond_between(1, 2).unwrap()).kind, BondKind::Double);
        assert_eq!(g.bond(g.bond_between(1, 3).unwrap()).kind, BondKind::Single);
    }

    #[test]
    fn ring_bond_symbol_on_either_side() {
        for s in ["C=1CCCCC1", "C1CCCCC=1", "C=1CCCCC=1"] {
            let g = parse_smiles(s).unwrap();
            assert_eq!(g.bond(g.bond_between(0, 5).unwrap()).kind, BondKind::Double, "{s}");
        }
        assert!(matches!(
            parse_smiles("C=1CCCCC#1"),
            Err(ParseError::RingBondMismatch { label: 1, .. })
        ));
    }

    #[test]
    fn percent_ring_labels_and_dots() {
        let g = parse_smiles("C%10CC%10.[Na+]").unwrap();
        assert_eq!(g.atom_count(), 4);
        assert_eq!(g.components().len(), 2);
        assert_eq!(g.atom(3).charge, 1);
    }

    #[test]
    fn bracket_atoms() {
        let g = parse_smiles("[13CH3][N@@H+]([O-])c1cc[nH]c1").unwrap();
        let a0 = g.atom(0);
        assert_eq!(a0.isotope, Some(13));
        assert_eq!(a0.hydrogens, Some(3));
        let a1 = g.atom(1);
        assert_eq!((a1.element, a1.charge, a1.hydrogens), (Element::N, 1, Some(1)));
        assert_eq!(a1.chirality, Some(Chirality::Clockwise));
        assert_eq!(g.atom(2).charge, -1);
        assert!(g.atom(6).aromatic && g.atom(6).hydrogens == Some(1));
        assert_eq!(parse_smiles("[Fe++]").unwrap().atom(0).charge, 2);
        assert_eq!(parse_smiles("[O-2]").unwrap().atom(0).charge, -2);
        assert_eq!(parse_smiles("[se]1cccc1").unwrap().atom(0).element.symbol(), "Se");
    }

    #[test]
    fn invalid_bracket_atoms() {
        for s in ["[Xx]", "[]", "[C+H]", "[CH3+++++++++]", "[f]"] {
            assert!(
                matches!(parse_smiles(s), Err(ParseError::InvalidBracketAtom { .. })),
                "{s}"
            );
        }
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_smiles("=C"), Err(ParseError::BondWithoutAtom { .. })));
        assert!(matches!(parse_smiles("C="), Err(ParseError::BondWithoutAtom { .. })));
        assert!(matches!(parse_smiles("C==C"), Err(ParseError::BondWithoutAtom { .. })));
        assert!(matches!(parse_smiles("C(=)C"), Err(ParseError::BondWithoutAtom { .. })));
        assert!(matches!(parse_smiles("CC)C"), Err(ParseError::UnbalancedBranch { .. })));
        assert!(matches!(parse_smiles("C(CC"), Err(ParseError::UnbalancedBranch { .. })));
        assert!(matches!(parse_smiles("(C)C"), Err(ParseError::UnbalancedBranch { .. })));
        assert!(matches!(parse_smiles("C()C"), Err(ParseError::EmptyBranch { .. })));
        assert!(matches!(parse_smiles("1CC1"), Err(ParseError::RingClosureWithoutAtom { .. })));
        assert!(matches!(parse_smiles(".C"), Err(ParseError::MisplacedDot { .. })));
        assert!(matches!(parse_smiles("C."), Err(ParseError::MisplacedDot { position: 1 })));
        assert!(matches!(parse_smiles("C11"), Err(ParseError::Graph { .. })));
        assert!(matches!(parse_smiles("C12CC12"), Err(ParseError::Graph { .. })));
        assert!(matches!(parse_smiles("C:C"), Err(ParseError::Graph { .. })));
    }

    #[test]
    fn inter_ring_aromatic_bond_becomes_single() {
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        assert_eq!(g.bond(g.bond_between(5, 6).unwrap()).kind, BondKind::Single);
        assert_eq!(
            g.bonds().iter().filter(|b| b.kind == BondKind::Aromatic).count(),
            12
        );
    }

    #[test]
    fn slashes_are_single_bonds_with_annotation() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bond(0).kind, BondKind::Single);
        assert_eq!(g.bond(0).direction, Some(BondDirection::Up));
    }
}
