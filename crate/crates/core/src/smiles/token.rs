use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Atom,
    BracketAtom,
    Bond,
    BranchOpen,
    BranchClose,
    RingClosure,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Character offset of the first character of `text` in the input.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("empty input")]
    EmptyInput,
    #[error("unknown character {character:?} at position {position}")]
    UnknownCharacter { character: char, position: usize },
    #[error("bracket atom opened at position {position} is never closed")]
    UnterminatedBracketAtom { position: usize },
}

/// Split a SMILES string into tokens. Concatenating the token texts gives
/// back the input exactly.
pub fn tokenize(input: &str) -> Result<Vec<Token>, TokenizeError> {
    if input.is_empty() {
        return Err(TokenizeError::EmptyInput);
    }
    let chars: Vec<char> = input.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (kind, len) = match c {
            '[' => match chars[i + 1..].iter().position(|&ch| ch == ']') {
                Some(close) => (TokenKind::BracketAtom, close + 2),
                None => return Err(TokenizeError::UnterminatedBracketAtom { position: i }),
            },
            'C' if chars.get(i + 1) == Some(&'l') => (TokenKind::Atom, 2),
            'B' if chars.get(i + 1) == Some(&'r') => (TokenKind::Atom, 2),
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => (TokenKind::Atom, 1),
            'b' | 'c' | 'n' | 'o' | 'p' | 's' => (TokenKind::Atom, 1),
            '-' | '=' | '#' | '/' | '\\' | ':' => (TokenKind::Bond, 1),
            '(' => (TokenKind::BranchOpen, 1),
            ')' => (TokenKind::BranchClose, 1),
            '.' => (TokenKind::Dot, 1),
            '0'..='9' => (TokenKind::RingClosure, 1),
            '%' => {
                let two_digits = chars.get(i + 1).is_some_and(char::is_ascii_digit)
                    && chars.get(i + 2).is_some_and(char::is_ascii_digit);
                if !two_digits {
                    return Err(TokenizeError::UnknownCharacter {
                        character: c,
                        position: i,
                    });
                }
                (TokenKind::RingClosure, 3)
            }
            _ => {
                return Err(TokenizeError::UnknownCharacter {
                    character: c,
                    position: i,
                })
            }
        };
        tokens.push(Token {
            kind,
            text: chars[i..i + len].iter().collect(),
            position: i,
        });
        i += len;
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn benzene_is_one_token_per_character() {
        assert_eq!(texts("c1ccccc1"), ["c", "1", "c", "c", "c", "c", "c", "1"]);
    }

    #[test]
    fn two_letter_halogens() {
        assert_eq!(texts("CCl"), ["C", "Cl"]);
        assert_eq!(texts("BrCBr"), ["Br", "C", "Br"]);
        assert_eq!(texts("CB"), ["C", "B"]);
    }

    #[test]
    fn aspirin_has_21_tokens() {
        assert_eq!(tokenize("CC(=O)Oc1ccccc1C(=O)O").unwrap().len(), 21);
    }

    #[test]
    fn bracket_and_percent_tokens() {
        let toks = tokenize("[NH4+].C%12CC%12").unwrap();
        assert_eq!(toks[0].kind, TokenKind::BracketAtom);
        assert_eq!(toks[0].text, "[NH4+]");
        assert_eq!(toks[1].kind, TokenKind::Dot);
        assert_eq!(toks[3].text, "%12");
        assert_eq!(toks[3].position, 8);
    }

    #[test]
    fn errors() {
        assert_eq!(tokenize(""), Err(TokenizeError::EmptyInput));
        assert_eq!(
            tokenize("CCx"),
            Err(TokenizeError::UnknownCharacter { character: 'x', position: 2 })
        );
        assert_eq!(
            tokenize("C[NH4"),
            Err(TokenizeError::UnterminatedBracketAtom { position: 1 })
        );
        assert!(tokenize("C%1").is_err());
        assert!(tokenize("C C").is_err());
    }

    proptest! {
        #[test]
        fn concatenation_reproduces_input(s in "[CNOcnos()=#1-9\\[\\]H+%-]{1,40}") {
            if let Ok(tokens) = tokenize(&s) {
                let joined: String = tokens.iter().map(|t| t.text.as_str()).collect();
                prop_assert_eq!(joined, s);
            }
        }
    }
}
