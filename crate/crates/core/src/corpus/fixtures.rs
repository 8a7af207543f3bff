//! Hand-built worlds.

use std::collections::BTreeMap;

use super::{
    Belief, BeliefBank, Concept, ConceptId, NodeId, Property, PropertyId, PropertyKind, Taxonomy, TaxonomyNode,
};
use crate::Result;

/// Small builder for closed-world banks: every (concept, property) pair not
/// listed as true is recorded as a false belief.
#[derive(Default)]
pub struct WorldBuilder {
    nodes: Vec<TaxonomyNode>,
    leaves: BTreeMap<NodeId, ConceptId>,
    concepts: Vec<String>,
    properties: Vec<(String, Vec<String>)>,
}

impl WorldBuilder {
    pub fn new(root: &str) -> Self {
        let mut b = Self::default();
        b.nodes.push(TaxonomyNode {
            id: NodeId(0),
            name: root.into(),
            parent: None,
        });
        b
    }

    fn node_id(&self, name: &str) -> NodeId {
        self.nodes
            .iter()
            .find(|n| n.name == name)
            .unwrap_or_else(|| panic!("unknown node {name}"))
            .id
    }

    pub fn category(mut self, name: &str, parent: &str) -> Self {
        let parent = self.node_id(parent);
        let id = NodeId(self.nodes.len());
        self.nodes.push(TaxonomyNode {
            id,
            name: name.into(),
            parent: Some(parent),
        });
        self
    }

    pub fn concepts(mut self, parent: &str, names: &[&str]) -> Self {
        for name in names {
            self = self.category(name, parent);
            let node = NodeId(self.nodes.len() - 1);
            self.leaves.insert(node, ConceptId(self.concepts.len()));
            self.concepts.push(name.to_string());
        }
        self
    }

    pub fn property(mut self, name: &str, holders: &[&str]) -> Self {
        self.properties
            .push((name.into(), holders.iter().map(|s| s.to_string()).collect()));
        self
    }

    pub fn build(self) -> Result<(BeliefBank, Taxonomy)> {
        let index: BTreeMap<&str, usize> = self.concepts.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let concepts = self
            .concepts
            .iter()
            .enumerate()
            .map(|(i, n)| Concept {
                id: ConceptId(i),
                name: n.clone(),
            })
            .collect();
        let properties = self
            .properties
            .iter()
            .enumerate()
            .map(|(i, (n, _))| Property {
                id: PropertyId(i),
                name: n.clone(),
                kind: PropertyKind::Known,
            })
            .collect();
        let mut beliefs = Vec::new();
        for c in 0..self.concepts.len() {
            for (p, (_, holders)) in self.properties.iter().enumerate() {
                let label = holders.iter().any(|h| index.get(h.as_str()) == Some(&c));
                beliefs.push(Belief {
                    concept: ConceptId(c),
                    property: PropertyId(p),
                    label,
                });
            }
        }
        let bank = BeliefBank::new(concepts, properties, beliefs)?;
        let taxonomy = Taxonomy::new(self.nodes, self.leaves, self.concepts.len())?;
        Ok((bank, taxonomy))
    }
}

const BIRDS: &[&str] = &["robin", "canary", "sparrow", "bluejay", "penguin"];
const MAMMALS: &[&str] = &["giraffe", "lion", "dog", "cat", "whale"];

/// Ten animals under `bird` and `mammal` with a closed-world property table.
pub fn birds_and_mammals() -> Result<(BeliefBank, Taxonomy)> {
    let all: Vec<&str> = BIRDS.iter().chain(MAMMALS).copied().collect();
    let flyers = ["robin", "canary", "sparrow", "bluejay"];
    let land = ["giraffe", "lion", "dog", "cat"];
    WorldBuilder::new("animal")
        .category("bird", "animal")
        .category("mammal", "animal")
        .concepts("bird", BIRDS)
        .concepts("mammal", MAMMALS)
        .property("breathe", &all)
        .property("eat", &all)
        .property("move", &all)
        .property("have_skin", &all)
        .property("have_feathers", BIRDS)
        .property("lay_eggs", BIRDS)
        .property("have_wings", BIRDS)
        .property("have_beak", BIRDS)
        .property("fly", &flyers)
        .property("sing", &flyers)
        .property("build_nests", &flyers)
        .property("perch", &flyers)
        .property("red_breast", &["robin"])
        .property("yellow", &["canary"])
        .property("brown", &["sparrow"])
        .property("blue_crest", &["bluejay"])
        .property("waddle", &["penguin"])
        .property("live_on_ice", &["penguin"])
        .property("swim", &["penguin", "whale"])
        .property("dive", &["penguin", "whale"])
        .property("give_milk", MAMMALS)
        .property("warm_fur", &land)
        .property("have_four_legs", &land)
        .property("long_neck", &["giraffe"])
        .property("eat_leaves", &["giraffe"])
        .property("roar", &["lion"])
        .property("hunt", &["lion", "cat"])
        .property("bark", &["dog"])
        .property("purr", &["cat"])
        .property("pet", &["dog", "cat", "canary"])
        .property("live_in_ocean", &["whale"])
        .property("huge", &["whale", "giraffe"])
        .build()
}
