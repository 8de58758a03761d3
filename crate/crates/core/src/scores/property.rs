//! Externally supplied molecular properties keyed by canonical SMILES.
//!
//! CSV with a header row `smiles,<name>` or `smiles,<name> (<units>)`.
//! Keys are canonicalized on load, so any valid spelling may be used.

use std::collections::HashMap;

use crate::smiles::{canonicalize, parse_smiles, MolGraph};

use super::ScoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    pub name: String,
    pub units: Option<String>,
    values: HashMap<String, f64>,
}

impl PropertyTable {
    pub fn new(name: impl Into<String>, units: Option<String>) -> Self {
        PropertyTable { name: name.into(), units, values: HashMap::new() }
    }

    pub fn from_csv(text: &str) -> Result<Self, ScoreError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| ScoreError::Table { line: 1, message: e.to_string() })?
            .clone();
        if headers.len() != 2 || headers[0].trim() != "smiles" {
            return Err(ScoreError::Table {
                line: 1,
                message: "expected header `smiles,<property>`".into(),
            });
        }
        let (name, units) = split_units(headers[1].trim());
        let mut table = PropertyTable::new(name, units);
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let err = |message: String| ScoreError::Table { line, message };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let g = parse_smiles(rec[0].trim()).map_err(|e| err(e.to_string()))?;
            let value: f64 = rec[1].trim().parse().map_err(|_| err(format!("bad number {:?}", &rec[1])))?;
            let key = canonicalize(&g).map_err(|e| err(e.to_string()))?;
            if table.values.insert(key.clone(), value).is_some() {
                return Err(err(format!("duplicate molecule {key}")));
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, g: &MolGraph, value: f64) -> Result<(), ScoreError> {
        let key = canonicalize(g).map_err(|e| ScoreError::Canonical(e.to_string()))?;
        self.values.insert(key, value);
        Ok(())
    }

    pub fn lookup(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        let key = canonicalize(g).map_err(|e| ScoreError::Canonical(e.to_string()))?;
        self.values
            .get(&key)
            .copied()
            .ok_or(ScoreError::PropertyMissing { smiles: key })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn split_units(header: &str) -> (String, Option<String>) {
    if let Some(open) = header.rfind('(') {
        if let Some(inner) = header[open + 1..].strip_suffix(')') {
            return (header[..open].trim().to_string(), Some(inner.trim().to_string()));
        }
    }
    (header.to_string(), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_canonical() {
        let t = PropertyTable::from_csv("smiles,k_tadf (1/us)\nOCC,0.5\nc1ccccc1,1.25\n").unwrap();
        assert_eq!(t.name, "k_tadf");
        assert_eq!(t.units.as_deref(), Some("1/us"));
        assert_eq!(t.lookup(&parse_smiles("CCO").unwrap()).unwrap(), 0.5);
        assert_eq!(t.lookup(&parse_smiles("c1ccccc1").unwrap()).unwrap(), 1.25);
    }

    #[test]
    fn missing_molecule() {
        let t = PropertyTable::from_csv("smiles,qed\nCCO,0.4\n").unwrap();
        assert!(t.units.is_none());
        assert!(matches!(
            t.lookup(&parse_smiles("CCN").unwrap()),
            Err(ScoreError::PropertyMissing { .. })
        ));
    }

    #[test]
    fn duplicate_spellings_are_rejected() {
        assert!(matches!(
            PropertyTable::from_csv("smiles,qed\nCCO,0.4\nOCC,0.5\n"),
            Err(ScoreError::Table { line: 3, .. })
        ));
    }
}
