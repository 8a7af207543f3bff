use std::collections::BTreeMap;

use super::{validate_token, ConceptId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyNode {
    pub id: NodeId,
    pub name: String,
    pub parent: Option<NodeId>,
}

/// Rooted tree over categories whose leaves carry the bank's concepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: Vec<TaxonomyNode>,
    leaf_concept: BTreeMap<NodeId, ConceptId>,
    root: NodeId,
    children: Vec<Vec<NodeId>>,
    concept_leaf: Vec<NodeId>,
}

impl Taxonomy {
    /// Validates tree shape and that each of `num_concepts` concepts sits on
    /// exactly one leaf.
    pub fn new(
        nodes: Vec<TaxonomyNode>,
        leaf_concept: BTreeMap<NodeId, ConceptId>,
        num_concepts: usize,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut names = std::collections::HashSet::new();
        let mut root = None;
        let mut children = vec![Vec::new(); n];
        for (i, node) in nodes.iter().enumerate() {
            if node.id.0 != i {
                return Err(Error::Validation(format!(
                    "taxonomy node {:?} has id {} at position {i}",
                    node.name, node.id.0
                )));
            }
            validate_token(&node.name, "taxonomy node")?;
            if !names.insert(node.name.as_str()) {
                return Err(Error::Validation(format!("duplicate node name {:?}", node.name)));
            }
            match node.parent {
                None => {
                    if root.replace(node.id).is_some() {
                        return Err(Error::Validation("taxonomy has more than one root".into()));
                    }
                }
                Some(p) if p.0 >= n => {
                    return Err(Error::Validation(format!(
                        "node {:?} has undeclared parent {}",
                        node.name, p.0
                    )))
                }
                Some(p) => children[p.0].push(node.id),
            }
        }
        let root = root.ok_or_else(|| Error::Validation("taxonomy has no root".into()))?;

        // every node must reach the root without revisiting a node
        let mut reached = vec![false; n];
        let mut stack = vec![root];
        let mut visited = 0;
        while let Some(id) = stack.pop() {
            if reached[id.0] {
                return Err(Error::Validation("taxonomy contains a cycle".into()));
            }
            reached[id.0] = true;
            visited += 1;
            stack.extend(children[id.0].iter().rev());
        }
        if visited != n {
            return Err(Error::Validation("taxonomy contains a cycle or detached nodes".into()));
        }

        let mut concept_leaf = vec![None; num_concepts];
        for (&node, &concept) in &leaf_concept {
            if node.0 >= n {
                return Err(Error::Validation(format!("leaf mapping names unknown node {}", node.0)));
            }
            if !children[node.0].is_empty() {
                return Err(Error::Validation(format!(
                    "concept {} mapped to inner node {:?}",
                    concept.0, nodes[node.0].name
                )));
            }
            let slot = concept_leaf.get_mut(concept.0).ok_or(Error::OutOfRange {
                kind: "concept",
                id: concept.0,
                count: num_concepts,
            })?;
            if slot.replace(node).is_some() {
                return Err(Error::Validation(format!("concept {} mapped to two leaves", concept.0)));
            }
        }
        let concept_leaf = concept_leaf
            .into_iter()
            .enumerate()
            .map(|(c, leaf)| leaf.ok_or_else(|| Error::Validation(format!("concept {c} has no taxonomy leaf"))))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            nodes,
            leaf_concept,
            root,
            children,
            concept_leaf,
        })
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn leaf_concepts(&self) -> &BTreeMap<NodeId, ConceptId> {
        &self.leaf_concept
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Result<&TaxonomyNode> {
        self.nodes.get(id.0).ok_or(Error::OutOfRange {
            kind: "taxonomy node",
            id: id.0,
            count: self.nodes.len(),
        })
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    pub fn leaf_of(&self, concept: ConceptId) -> Result<NodeId> {
        self.concept_leaf.get(concept.0).copied().ok_or(Error::OutOfRange {
            kind: "concept",
            id: concept.0,
            count: self.concept_leaf.len(),
        })
    }

    /// Node ids from `id` up to and including the root.
    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur.0].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).len() - 1
    }

    /// Concepts on leaves below `id`, in concept-id order.
    pub fn concepts_under(&self, id: NodeId) -> Result<Vec<ConceptId>> {
        self.node(id)?;
        let mut out: Vec<ConceptId> = self
            .concept_leaf
            .iter()
            .enumerate()
            .filter(|(_, &leaf)| self.ancestors(leaf).contains(&id))
            .map(|(c, _)| ConceptId(c))
            .collect();
        out.sort();
        Ok(out)
    }

    pub fn is_under(&self, concept: ConceptId, category: NodeId) -> Result<bool> {
        Ok(self.ancestors(self.leaf_of(concept)?).contains(&category))
    }

    /// Child of the root on the path to `concept` (the root itself for a
    /// single-node tree).
    pub fn top_level_branch(&self, concept: ConceptId) -> Result<NodeId> {
        let path = self.ancestors(self.leaf_of(concept)?);
        Ok(if path.len() >= 2 { path[path.len() - 2] } else { path[0] })
    }

    /// Number of edges between the two concepts' leaves.
    pub fn tree_distance(&self, a: ConceptId, b: ConceptId) -> Result<usize> {
        let pa = self.ancestors(self.leaf_of(a)?);
        let pb = self.ancestors(self.leaf_of(b)?);
        let (i, j) = pa
            .iter()
            .enumerate()
            .find_map(|(i, n)| pb.iter().position(|m| m == n).map(|j| (i, j)))
            .expect("rooted tree has a common ancestor");
        Ok(i + j)
    }
}
