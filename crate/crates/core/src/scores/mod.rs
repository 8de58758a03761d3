//! Design objectives: logP, a synthetic-accessibility proxy, the large-ring
//! penalty, corpus normalization and externally supplied property tables.

mod logp;
mod property;

use serde::{Deserialize, Serialize};

use crate::smiles::{rings, Element, MolGraph};

pub use logp::{logp, AtomContribTable, AtomFeatures, AtomPattern};
pub use property::PropertyTable;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("no table pattern matches atom {atom}")]
    NoPatternMatch { atom: usize },
    #[error("table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("property table has no entry for {smiles}")]
    PropertyMissing { smiles: String },
    #[error("normalization needs at least two molecules, got {0}")]
    TooFewMolecules(usize),
    #[error("canonicalization failed: {0}")]
    Canonical(String),
}

/// Coefficients of the SA proxy.
pub const SA_SIZE: f64 = 1.0;
pub const SA_RING: f64 = 0.5;
pub const SA_FUSED_BOND: f64 = 0.25;
pub const SA_MACROCYCLE: f64 = 1.0;
pub const SA_HETERO_FRACTION: f64 = 1.0;

/// Rings larger than this count as macrocycles in the SA proxy.
pub const MACROCYCLE_SIZE: usize = 8;

/// Synthetic-accessibility proxy, higher is harder:
///
/// `SA_SIZE·ln(n) + SA_RING·rings + SA_FUSED_BOND·fused_bonds
///  + SA_MACROCYCLE·macrocycles + SA_HETERO_FRACTION·hetero/n`
///
/// over the `n` heavy atoms. A fused bond lies on two or more perceived
/// rings. Zero for an empty graph.
pub fn sa_proxy(g: &MolGraph) -> f64 {
    let heavy: Vec<usize> = (0..g.atom_count()).filter(|&i| g.atom(i).element != Element::H).collect();
    if heavy.is_empty() {
        return 0.0;
    }
    let n = heavy.len() as f64;
    let rs = rings(g);
    let mut per_bond = vec![0usize; g.bond_count()];
    for r in &rs {
        for &b in &r.bonds {
            per_bond[b] += 1;
        }
    }
    let fused = per_bond.iter().filter(|&&c| c >= 2).count() as f64;
    let macro_rings = rs.iter().filter(|r| r.len() > MACROCYCLE_SIZE).count() as f64;
    let hetero = heavy.iter().filter(|&&i| g.atom(i).element != Element::C).count() as f64;
    SA_SIZE * n.ln()
        + SA_RING * rs.len() as f64
        + SA_FUSED_BOND * fused
        + SA_MACROCYCLE * macro_rings
        + SA_HETERO_FRACTION * hetero / n
}

/// Which rings the penalty looks at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingPenaltyMode {
    #[default]
    AllRings,
    CarbonOnly,
}

/// `max(0, largest ring − 6)`, zero for acyclic graphs.
pub fn ring_penalty(g: &MolGraph) -> f64 {
    ring_penalty_with(g, RingPenaltyMode::AllRings)
}

pub fn ring_penalty_with(g: &MolGraph, mode: RingPenaltyMode) -> f64 {
    let largest = rings(g)
        .into_iter()
        .filter(|r| match mode {
            RingPenaltyMode::AllRings => true,
            RingPenaltyMode::CarbonOnly => r.atoms.iter().all(|&a| g.atom(a).element == Element::C),
        })
        .map(|r| r.len())
        .max()
        .unwrap_or(0);
    largest.saturating_sub(6) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub mean: f64,
    pub std: f64,
}

impl ComponentStats {
    /// Population mean and std. A constant component gets std 1.
    pub fn fit(values: &[f64]) -> (ComponentStats, bool) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            (ComponentStats { mean, std }, false)
        } else {
            (ComponentStats { mean, std: 1.0 }, true)
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub property: ComponentStats,
    pub sa: ComponentStats,
    pub ring: ComponentStats,
}

/// Raw objective components of one molecule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub property: f64,
    pub sa: f64,
    pub ring: f64,
}

impl Normalization {
    /// Fits per-component statistics. Constant components are logged and
    /// left unscaled.
    pub fn fit(raw: &[RawScores]) -> Result<Normalization, ScoreError> {
        if raw.len() < 2 {
            return Err(ScoreError::TooFewMolecules(raw.len()));
        }
        let fit = |name: &str, f: fn(&RawScores) -> f64| {
            let (s, degenerate) = ComponentStats::fit(&raw.iter().map(f).collect::<Vec<_>>());
            if degenerate {
                log::warn!("{name} is constant over the corpus; using std 1");
            }
            s
        };
        Ok(Normalization {
            property: fit("property", |r| r.property),
            sa: fit("sa", |r| r.sa),
            ring: fit("ring penalty", |r| r.ring),
        })
    }

    pub fn breakdown(&self, raw: RawScores) -> ScoreBreakdown {
        let logp_norm = self.property.apply(raw.property);
        let sa_norm = self.sa.apply(raw.sa);
        let ring_norm = self.ring.apply(raw.ring);
        ScoreBreakdown {
            logp_raw: raw.property,
            sa_raw: raw.sa,
            ring_raw: raw.ring,
            logp_norm,
            sa_norm,
            ring_norm,
            j: logp_norm - sa_norm - ring_norm,
        }
    }
}

/// Raw and normalized components plus the composite. For external
/// properties the `logp_*` fields hold the table value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub logp_raw: f64,
    pub sa_raw: f64,
    pub ring_raw: f64,
    pub logp_norm: f64,
    pub sa_norm: f64,
    pub ring_norm: f64,
    pub j: f64,
}

/// Where the first objective component comes from.
#[derive(Debug, Clone)]
pub enum PropertySource {
    LogP(AtomContribTable),
    External(PropertyTable),
}

impl PropertySource {
    pub fn value(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        match self {
            PropertySource::LogP(t) => logp(g, t),
            PropertySource::External(t) => t.lookup(g),
        }
    }
}

/// A property source, a ring-penalty mode and fitted statistics.
#[derive(Debug, Clone)]
pub struct Objective {
    pub source: PropertySource,
    pub ring_mode: RingPenaltyMode,
    pub norm: Normalization,
}

impl Objective {
    pub fn raw(source: &PropertySource, ring_mode: RingPenaltyMode, g: &MolGraph) -> Result<RawScores, ScoreError> {
        Ok(RawScores {
            property: source.value(g)?,
            sa: sa_proxy(g),
            ring: ring_penalty_with(g, ring_mode),
        })
    }

    /// Fits normalization on `corpus`.
    pub fn fit(source: PropertySource, ring_mode: RingPenaltyMode, corpus: &[MolGraph]) -> Result<Objective, ScoreError> {
        let raw = corpus
            .iter()
            .map(|g| Objective::raw(&source, ring_mode, g))
            .collect::<Result<Vec<_>, _>>()?;
        let norm = Normalization::fit(&raw)?;
        Ok(Objective { source, ring_mode, norm })
    }

    pub fn score(&self, g: &MolGraph) -> Result<ScoreBreakdown, ScoreError> {
        Ok(self.norm.breakdown(Objective::raw(&self.source, self.ring_mode, g)?))
    }
}

/// Normalization of logP, SA proxy and ring penalty over `corpus`.
pub fn fit_normalization(corpus: &[MolGraph], table: &AtomContribTable) -> Result<Normalization, ScoreError> {
    let raw = corpus
        .iter()
        .map(|g| Objective::raw(&PropertySource::LogP(table.clone()), RingPenaltyMode::AllRings, g))
        .collect::<Result<Vec<_>, _>>()?;
    Normalization::fit(&raw)
}

/// logP − SA − ring penalty, each normalized.
pub fn j_logp(g: &MolGraph, table: &AtomContribTable, norm: &Normalization) -> Result<ScoreBreakdown, ScoreError> {
    Ok(norm.breakdown(RawScores {
        property: logp(g, table)?,
        sa: sa_proxy(g),
        ring: ring_penalty(g),
    }))
}

/// Table property − SA − ring penalty, each normalized.
pub fn j_external(g: &MolGraph, prop: &PropertyTable, norm: &Normalization) -> Result<ScoreBreakdown, ScoreError> {
    Ok(norm.breakdown(RawScores {
        property: prop.lookup(g)?,
        sa: sa_proxy(g),
        ring: ring_penalty(g),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn mol(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn ring_penalty_examples() {
        assert_eq!(ring_penalty(&mol("c1ccccc1")), 0.0);
        assert_eq!(ring_penalty(&mol("C1CCCCCCC1")), 2.0);
        assert_eq!(ring_penalty(&mol("CCO")), 0.0);
        assert_eq!(ring_penalty_with(&mol("C1CCCOCCC1"), RingPenaltyMode::CarbonOnly), 0.0);
        assert_eq!(ring_penalty_with(&mol("C1CCCOCCC1"), RingPenaltyMode::AllRings), 2.0);
    }

    #[test]
    fn sa_single_atom_is_zero() {
        assert_eq!(sa_proxy(&mol("C")), 0.0);
    }

    #[test]
    fn sa_naphthalene_by_hand() {
        // ten atoms, two rings, one shared bond
        let expected = 10f64.ln() + 0.5 * 2.0 + 0.25 * 1.0;
        assert!((sa_proxy(&mol("c1ccc2ccccc2c1")) - expected).abs() < 1e-12);
    }

    #[test]
    fn sa_adding_a_ring_never_decreases() {
        let open = sa_proxy(&mol("CCCCCC"));
        let closed = sa_proxy(&mol("C1CCCCC1"));
        assert!(closed >= open);
    }

    #[test]
    fn two_point_normalization() {
        let (s, degenerate) = ComponentStats::fit(&[0.0, 2.0]);
        assert!(!degenerate);
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 1.0);
    }

    #[test]
    fn constant_component_gets_unit_std() {
        let (s, degenerate) = ComponentStats::fit(&[3.0, 3.0, 3.0]);
        assert!(degenerate);
        assert_eq!(s.std, 1.0);
        assert_eq!(s.mean, 3.0);
    }

    #[test]
    fn normalization_needs_two_molecules() {
        let t = AtomContribTable::default_table();
        assert!(matches!(fit_normalization(&[mol("C")], t), Err(ScoreError::TooFewMolecules(1))));
    }

    #[test]
    fn j_is_zero_at_corpus_means() {
        let norm = Normalization {
            property: ComponentStats { mean: 1.5, std: 2.0 },
            sa: ComponentStats { mean: 3.0, std: 0.5 },
            ring: ComponentStats { mean: 0.2, std: 1.0 },
        };
        let b = norm.breakdown(RawScores { property: 1.5, sa: 3.0, ring: 0.2 });
        assert_eq!(b.j, 0.0);
        let up = norm.breakdown(RawScores { property: 1.6, sa: 3.0, ring: 0.2 });
        assert!(up.j > b.j);
    }

    #[test]
    fn zero_table_gives_zero_logp() {
        let zero = AtomContribTable::default_table().with_constant(0.0);
        for s in ["CCO", "c1ccccc1Cl", "O=C(O)c1ccccc1OC(C)=O"] {
            assert_eq!(logp(&mol(s), &zero).unwrap(), 0.0);
        }
    }
}
