//! Belief banks: concepts, properties and labelled (concept, property) facts.
//!
//! A bank is immutable once built. Minting a nonce property returns a new
//! bank. Concept and property ids are dense indices that equal list
//! positions.

pub mod fixtures;
mod generate;
mod io;
mod similarity;
mod taxonomy;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

pub use generate::{generate_taxonomic_bank, TaxonomySpec};
pub use io::load_belief_bank;
pub use similarity::{jaccard, jaccard_similarity, SimilarityOracle};
pub use taxonomy::{NodeId, Taxonomy, TaxonomyNode};

use crate::digest::sha256_hex;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropertyId(pub usize);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl PropertyId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concept {
    pub id: ConceptId,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PropertyKind {
    Known,
    Nonce,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    pub id: PropertyId,
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Belief {
    pub concept: ConceptId,
    pub property: PropertyId,
    pub label: bool,
}

#[derive(Clone, Debug)]
pub struct BeliefBank {
    concepts: Vec<Concept>,
    properties: Vec<Property>,
    beliefs: Vec<Belief>,
    concept_index: HashMap<String, ConceptId>,
    property_index: HashMap<String, PropertyId>,
}

impl PartialEq for BeliefBank {
    fn eq(&self, other: &Self) -> bool {
        self.concepts == other.concepts && self.properties == other.properties && self.beliefs == other.beliefs
    }
}

impl Eq for BeliefBank {}

/// Names are whitespace-free tokens so they survive the tab-separated formats.
pub(crate) fn validate_token(name: &str, what: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::Validation(format!("empty {what} name")));
    }
    if name.chars().any(|c| c.is_whitespace() || c == '+' || c == ',') {
        return Err(Error::Validation(format!(
            "{what} name {name:?} must not contain whitespace, '+' or ','"
        )));
    }
    Ok(())
}

impl BeliefBank {
    /// Builds a bank from parts whose ids must equal their list positions.
    pub fn new(concepts: Vec<Concept>, properties: Vec<Property>, beliefs: Vec<Belief>) -> Result<Self> {
        let mut concept_index = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            if c.id.0 != i {
                return Err(Error::Validation(format!(
                    "concept {:?} has id {} at position {i}; ids must be dense",
                    c.name, c.id
                )));
            }
            validate_token(&c.name, "concept")?;
            if concept_index.insert(c.name.clone(), c.id).is_some() {
                return Err(Error::Validation(format!("duplicate concept name {:?}", c.name)));
            }
        }
        let mut property_index = HashMap::with_capacity(properties.len());
        for (i, p) in properties.iter().enumerate() {
            if p.id.0 != i {
                return Err(Error::Validation(format!(
                    "property {:?} has id {} at position {i}; ids must be dense",
                    p.name, p.id
                )));
            }
            validate_token(&p.name, "property")?;
            if property_index.insert(p.name.clone(), p.id).is_some() {
                return Err(Error::Validation(format!("duplicate property name {:?}", p.name)));
            }
        }
        let mut seen = BTreeSet::new();
        for b in &beliefs {
            if b.concept.0 >= concepts.len() {
                return Err(Error::Validation(format!(
                    "belief references undeclared concept {}",
                    b.concept
                )));
            }
            let Some(prop) = properties.get(b.property.0) else {
                return Err(Error::Validation(format!(
                    "belief references undeclared property {}",
                    b.property
                )));
            };
            if prop.kind == PropertyKind::Nonce {
                return Err(Error::Validation(format!(
                    "nonce property {:?} appears in a belief",
                    prop.name
                )));
            }
            if !seen.insert((b.concept, b.property)) {
                return Err(Error::Validation(format!(
                    "duplicate belief ({}, {})",
                    concepts[b.concept.0].name, prop.name
                )));
            }
        }
        if !beliefs.iter().any(|b| b.label) {
            return Err(Error::Validation("bank holds no true belief".into()));
        }
        if !beliefs.iter().any(|b| !b.label) {
            return Err(Error::Validation("bank holds no false belief".into()));
        }
        Ok(Self {
            concepts,
            properties,
            beliefs,
            concept_index,
            property_index,
        })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }

    pub fn beliefs(&self) -> &[Belief] {
        &self.beliefs
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_properties(&self) -> usize {
        self.properties.len()
    }

    pub fn concept_ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.concepts.len()).map(ConceptId)
    }

    pub fn concept(&self, id: ConceptId) -> Result<&Concept> {
        self.concepts.get(id.0).ok_or(Error::OutOfRange {
            kind: "concept",
            id: id.0,
            count: self.concepts.len(),
        })
    }

    pub fn property(&self, id: PropertyId) -> Result<&Property> {
        self.properties.get(id.0).ok_or(Error::OutOfRange {
            kind: "property",
            id: id.0,
            count: self.properties.len(),
        })
    }

    pub fn concept_by_name(&self, name: &str) -> Option<ConceptId> {
        self.concept_index.get(name).copied()
    }

    pub fn property_by_name(&self, name: &str) -> Option<PropertyId> {
        self.property_index.get(name).copied()
    }

    pub fn is_known(&self, id: PropertyId) -> bool {
        self.properties.get(id.0).is_some_and(|p| p.kind == PropertyKind::Known)
    }

    /// Known properties held true by `concept`.
    pub fn true_set(&self, concept: ConceptId) -> Result<BTreeSet<PropertyId>> {
        self.concept(concept)?;
        Ok(self
            .beliefs
            .iter()
            .filter(|b| b.label && b.concept == concept)
            .map(|b| b.property)
            .collect())
    }

    /// Concepts holding `property` true, in id order.
    pub fn holders(&self, property: PropertyId) -> Result<Vec<ConceptId>> {
        self.property(property)?;
        let set: BTreeSet<ConceptId> = self
            .beliefs
            .iter()
            .filter(|b| b.label && b.property == property)
            .map(|b| b.concept)
            .collect();
        Ok(set.into_iter().collect())
    }

    /// Returns a copy with a new nonce property appended; no beliefs are added.
    pub fn mint_nonce(&self, name: &str) -> Result<(BeliefBank, PropertyId)> {
        validate_token(name, "nonce property")?;
        if self.property_index.contains_key(name) {
            return Err(Error::NameCollision(name.to_string()));
        }
        let id = PropertyId(self.properties.len());
        let mut bank = self.clone();
        bank.properties.push(Property {
            id,
            name: name.to_string(),
            kind: PropertyKind::Nonce,
        });
        bank.property_index.insert(name.to_string(), id);
        Ok((bank, id))
    }

    /// SHA-256 of the serialized bank file.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }
}

/// Free-function form of [`BeliefBank::mint_nonce`].
pub fn mint_nonce_property(bank: &BeliefBank, name: &str) -> Result<(BeliefBank, PropertyId)> {
    bank.mint_nonce(name)
}
