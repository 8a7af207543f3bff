use std::collections::BTreeSet;

use super::{BeliefBank, ConceptId, PropertyId, Taxonomy};
use crate::{Error, Result};

/// `|a ∩ b| / |a ∪ b|`, and 1 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Ground-truth concept similarity: Jaccard overlap of true Known-property sets.
#[derive(Clone, Debug)]
pub struct SimilarityOracle {
    sets: Vec<BTreeSet<PropertyId>>,
}

impl SimilarityOracle {
    /// Uses every Known property, cross-cutting ones included.
    pub fn new(bank: &BeliefBank) -> Self {
        let mut sets = vec![BTreeSet::new(); bank.num_concepts()];
        for b in bank.beliefs().iter().filter(|b| b.label) {
            sets[b.concept.0].insert(b.property);
        }
        Self { sets }
    }

    /// Keeps only properties whose holders are exactly the concepts under some
    /// taxonomy node.
    pub fn taxonomic_only(bank: &BeliefBank, taxonomy: &Taxonomy) -> Result<Self> {
        let node_sets: BTreeSet<Vec<ConceptId>> = taxonomy
            .nodes()
            .iter()
            .map(|n| taxonomy.concepts_under(n.id))
            .collect::<Result<_>>()?;
        let mut keep = vec![false; bank.num_properties()];
        for p in bank.properties() {
            let holders = bank.holders(p.id)?;
            keep[p.id.0] = !holders.is_empty() && node_sets.contains(&holders);
        }
        let mut oracle = Self::new(bank);
        for set in &mut oracle.sets {
            set.retain(|p| keep[p.0]);
        }
        Ok(oracle)
    }

    pub fn num_concepts(&self) -> usize {
        self.sets.len()
    }

    pub fn true_set(&self, c: ConceptId) -> Result<&BTreeSet<PropertyId>> {
        self.sets.get(c.0).ok_or(Error::OutOfRange {
            kind: "concept",
            id: c.0,
            count: self.sets.len(),
        })
    }

    pub fn similarity(&self, a: ConceptId, b: ConceptId) -> Result<f64> {
        Ok(jaccard(self.true_set(a)?, self.true_set(b)?))
    }
}

pub fn jaccard_similarity(bank: &BeliefBank, a: ConceptId, b: ConceptId) -> Result<f64> {
    Ok(jaccard(&bank.true_set(a)?, &bank.true_set(b)?))
}
