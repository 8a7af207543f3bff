//! Tab-separated bank and taxonomy files.
//!
//! Bank: `C\tid\tname`, then `P\tid\tname\tknown|nonce`, then
//! `B\tconcept_id\tproperty_id\t0|1`, sections in that order. Taxonomy:
//! `N\tnode_id\tname\tparent_id|-` followed by `L\tnode_id\tconcept_id`.
//! Lines starting with `#` and blank lines are skipped. Output uses LF.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    Belief, BeliefBank, Concept, ConceptId, NodeId, Property, PropertyId, PropertyKind, Taxonomy, TaxonomyNode,
};
use crate::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_index(field: &str, line: usize, what: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("{what} {field:?} is not a non-negative integer")))
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| (n, l.split('\t').collect()))
}

impl BeliefBank {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in self.concepts() {
            let _ = writeln!(out, "C\t{}\t{}", c.id, c.name);
        }
        for p in self.properties() {
            let kind = match p.kind {
                PropertyKind::Known => "known",
                PropertyKind::Nonce => "nonce",
            };
            let _ = writeln!(out, "P\t{}\t{}\t{kind}", p.id, p.name);
        }
        for b in self.beliefs() {
            let _ = writeln!(out, "B\t{}\t{}\t{}", b.concept, b.property, u8::from(b.label));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut concepts = Vec::new();
        let mut properties = Vec::new();
        let mut beliefs = Vec::new();
        let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut section = 0u8;

        for (line, fields) in records(text) {
            let (tag, rest) = (fields[0], &fields[1..]);
            let order = match tag {
                "C" => 0,
                "P" => 1,
                "B" => 2,
                other => return Err(parse_err(line, format!("unknown record tag {other:?}"))),
            };
            if order < section {
                return Err(parse_err(line, format!("{tag} record after a later section")));
            }
            section = order;
            match tag {
                "C" => {
                    let [id, name] = rest else {
                        return Err(parse_err(line, "concept record needs 2 fields"));
                    };
                    let id = parse_index(id, line, "concept id")?;
                    if id != concepts.len() {
                        return Err(parse_err(
                            line,
                            format!("expected concept id {}, got {id}", concepts.len()),
                        ));
                    }
                    concepts.push(Concept {
                        id: ConceptId(id),
                        name: name.to_string(),
                    });
                }
                "P" => {
                    let [id, name, kind] = rest else {
                        return Err(parse_err(line, "property record needs 3 fields"));
                    };
                    let id = parse_index(id, line, "property id")?;
                    if id != properties.len() {
                        return Err(parse_err(
                            line,
                            format!("expected property id {}, got {id}", properties.len()),
                        ));
                    }
                    let kind = match *kind {
                        "known" => PropertyKind::Known,
                        "nonce" => PropertyKind::Nonce,
                        other => return Err(parse_err(line, format!("property kind {other:?}"))),
                    };
                    properties.push(Property {
                        id: PropertyId(id),
                        name: name.to_string(),
                        kind,
                    });
                }
                _ => {
                    let [c, p, label] = rest else {
                        return Err(parse_err(line, "belief record needs 3 fields"));
                    };
                    let c = parse_index(c, line, "concept id")?;
                    let p = parse_index(p, line, "property id")?;
                    let label = match *label {
                        "1" => true,
                        "0" => false,
                        other => return Err(parse_err(line, format!("label {other:?} is not 0 or 1"))),
                    };
                    if c >= concepts.len() {
                        return Err(Error::Validation(format!("line {line}: undeclared concept id {c}")));
                    }
                    if p >= properties.len() {
                        return Err(Error::Validation(format!("line {line}: undeclared property id {p}")));
                    }
                    if let Some(&first_line) = first_seen.get(&(c, p)) {
                        return Err(Error::DuplicateBelief {
                            line,
                            first_line,
                            concept: concepts[c].name.clone(),
                            property: properties[p].name.clone(),
                        });
                    }
                    first_seen.insert((c, p), line);
                    beliefs.push(Belief {
                        concept: ConceptId(c),
                        property: PropertyId(p),
                        label,
                    });
                }
            }
        }
        BeliefBank::new(concepts, properties, beliefs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Reads a bank file from disk.
pub fn load_belief_bank(path: impl AsRef<Path>) -> Result<BeliefBank> {
    BeliefBank::load(path)
}

impl Taxonomy {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in self.nodes() {
            let parent = n.parent.map_or("-".to_string(), |p| p.0.to_string());
            let _ = writeln!(out, "N\t{}\t{}\t{parent}", n.id.0, n.name);
        }
        for (node, concept) in self.leaf_concepts() {
            let _ = writeln!(out, "L\t{}\t{}", node.0, concept.0);
        }
        out
    }

    /// Parses a taxonomy for a bank with `num_concepts` concepts.
    pub fn parse(text: &str, num_concepts: usize) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut leaves = BTreeMap::new();
        for (line, fields) in records(text) {
            match fields.as_slice() {
                ["N", id, name, parent] => {
                    if !leaves.is_empty() {
                        return Err(parse_err(line, "N record after L records"));
                    }
                    let id = parse_index(id, line, "node id")?;
                    if id != nodes.len() {
                        return Err(parse_err(line, format!("expected node id {}, got {id}", nodes.len())));
                    }
                    let parent = match *parent {
                        "-" => None,
                        p => Some(NodeId(parse_index(p, line, "parent id")?)),
                    };
                    nodes.push(TaxonomyNode {
                        id: NodeId(id),
                        name: name.to_string(),
                        parent,
                    });
                }
                ["L", node, concept] => {
                    let node = NodeId(parse_index(node, line, "node id")?);
                    let concept = ConceptId(parse_index(concept, line, "concept id")?);
                    if leaves.insert(node, concept).is_some() {
                        return Err(parse_err(line, format!("node {} mapped twice", node.0)));
                    }
                }
                _ => return Err(parse_err(line, "expected an N or L record")),
            }
        }
        Taxonomy::new(nodes, leaves, num_concepts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, num_concepts: usize) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, num_concepts)
    }
}
