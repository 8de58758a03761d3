//! SMILES lexing, parsing, validation, ring perception and writing.
//!
//! Supported grammar: organic-subset atoms `B C N O P S F Cl Br I`, aromatic
//! `b c n o p s`, bracket atoms with isotope, chirality, hydrogen count and
//! charge, bonds `- = # : / \`, branches, ring closures `0-9` and `%NN`,
//! and `.` disconnection. Chirality and `/` `\` are kept as annotations only.

mod canon;
mod graph;
mod parse;
mod rings;
mod token;
mod validate;
mod write;

pub use canon::{canonical_ranks, canonicalize};
pub use graph::{
    Atom, Bond, BondDirection, BondKind, Chirality, Element, GraphError, MolGraph, ValenceTable,
    ValenceTableError,
};
pub use parse::{parse, parse_smiles, ParseError};
pub use rings::{ring_sizes, rings, Ring};
pub use token::{tokenize, Token, TokenKind, TokenizeError};
pub use validate::{validate, validate_with, ValidationReport, Violation, ViolationCode};
pub use write::{serialize, WriteError};

/// Non-empty, non-comment lines of a SMILES corpus (lines starting with `#`
/// are skipped, surrounding whitespace trimmed).
pub fn corpus_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Parse and validate a string; `None` unless it yields a valid graph.
pub fn parse_valid(s: &str) -> Option<MolGraph> {
    let g = parse_smiles(s).ok()?;
    validate(&g).valid.then_some(g)
}
