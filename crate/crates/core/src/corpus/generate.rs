use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    Belief, BeliefBank, Concept, ConceptId, NodeId, Property, PropertyId, PropertyKind, Taxonomy, TaxonomyNode,
};
use crate::rng::seeded_rng;
use crate::{Error, Result};

const MAX_LEAVES: usize = 1 << 20;

/// Shape of a synthetic hierarchical world.
#[derive(Clone, Debug, PartialEq)]
pub struct TaxonomySpec {
    pub branching: usize,
    pub depth: usize,
    pub props_per_node: usize,
    pub cross_cutting_props: usize,
    pub cross_cutting_coverage: f64,
    /// False beliefs sampled per true belief.
    pub negative_ratio: f64,
    pub seed: u64,
}

impl Default for TaxonomySpec {
    fn default() -> Self {
        Self {
            branching: 3,
            depth: 2,
            props_per_node: 2,
            cross_cutting_props: 2,
            cross_cutting_coverage: 0.4,
            negative_ratio: 1.0,
            seed: 0,
        }
    }
}

impl TaxonomySpec {
    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(Error::Config(format!("branching {} < 2", self.branching)));
        }
        if self.depth < 1 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.props_per_node < 1 {
            return Err(Error::Config("props_per_node must be at least 1".into()));
        }
        if !(self.cross_cutting_coverage > 0.0 && self.cross_cutting_coverage < 1.0) {
            return Err(Error::Config(format!(
                "cross_cutting_coverage {} outside (0, 1)",
                self.cross_cutting_coverage
            )));
        }
        if !(self.negative_ratio.is_finite() && self.negative_ratio > 0.0) {
            return Err(Error::Config(format!(
                "negative_ratio {} must be positive",
                self.negative_ratio
            )));
        }
        if self.leaf_count().is_none_or(|l| l > MAX_LEAVES) {
            return Err(Error::Config(format!("branching^depth exceeds {MAX_LEAVES} leaves")));
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> Option<usize> {
        u32::try_from(self.depth)
            .ok()
            .and_then(|d| self.branching.checked_pow(d))
    }

    pub fn node_count(&self) -> Option<usize> {
        let d = u32::try_from(self.depth + 1).ok()?;
        Some((self.branching.checked_pow(d)? - 1) / (self.branching - 1))
    }

    /// Leaves covered by each cross-cutting property.
    pub fn cross_cutting_size(&self) -> usize {
        let leaves = self.leaf_count().unwrap_or(0) as f64;
        (self.cross_cutting_coverage * leaves).ceil() as usize
    }
}

/// Builds a complete `branching`-ary tree of the given depth, one concept per
/// leaf, and the belief bank it implies. Fully determined by `spec.seed`.
pub fn generate_taxonomic_bank(spec: &TaxonomySpec) -> Result<(BeliefBank, Taxonomy)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);

    // breadth-first node construction; ids follow BFS order
    let mut nodes = Vec::new();
    let mut queue = VecDeque::new();
    nodes.push(TaxonomyNode {
        id: NodeId(0),
        name: "root".into(),
        parent: None,
    });
    queue.push_back((NodeId(0), String::new(), 0usize));
    let mut leaves = Vec::new();
    while let Some((id, path, depth)) = queue.pop_front() {
        if depth == spec.depth {
            leaves.push(id);
            continue;
        }
        for k in 0..spec.branching {
            let child_path = if path.is_empty() {
                k.to_string()
            } else {
                format!("{path}_{k}")
            };
            let child = NodeId(nodes.len());
            nodes.push(TaxonomyNode {
                id: child,
                name: format!("n{child_path}"),
                parent: Some(id),
            });
            queue.push_back((child, child_path, depth + 1));
        }
    }

    let concepts: Vec<Concept> = leaves
        .iter()
        .enumerate()
        .map(|(i, leaf)| Concept {
            id: ConceptId(i),
            name: nodes[leaf.0].name.clone(),
        })
        .collect();
    let leaf_map: BTreeMap<NodeId, ConceptId> = leaves
        .iter()
        .enumerate()
        .map(|(i, &leaf)| (leaf, ConceptId(i)))
        .collect();
    let taxonomy = Taxonomy::new(nodes, leaf_map, concepts.len())?;

    let mut properties = Vec::new();
    let mut holders: Vec<Vec<ConceptId>> = Vec::new();
    for node in taxonomy.nodes() {
        let under = taxonomy.concepts_under(node.id)?;
        for k in 0..spec.props_per_node {
            properties.push(Property {
                id: PropertyId(properties.len()),
                name: format!("p_{}_{k}", node.name),
                kind: PropertyKind::Known,
            });
            holders.push(under.clone());
        }
    }

    if spec.cross_cutting_props > 0 {
        let size = spec.cross_cutting_size();
        if size < 2 {
            return Err(Error::Generation(format!(
                "cross-cutting subsets of {size} leaf cannot span two top-level branches"
            )));
        }
        let branches = taxonomy.children(taxonomy.root()).to_vec();
        for x in 0..spec.cross_cutting_props {
            let picked: Vec<NodeId> = branches.choose_multiple(&mut rng, 2).copied().collect();
            let mut chosen = BTreeSet::new();
            for b in picked {
                let under = taxonomy.concepts_under(b)?;
                chosen.insert(under[rng.gen_range(0..under.len())]);
            }
            let rest: Vec<ConceptId> = (0..concepts.len())
                .map(ConceptId)
                .filter(|c| !chosen.contains(c))
                .collect();
            chosen.extend(rest.choose_multiple(&mut rng, size - 2).copied());
            properties.push(Property {
                id: PropertyId(properties.len()),
                name: format!("x{x}"),
                kind: PropertyKind::Known,
            });
            holders.push(chosen.into_iter().collect());
        }
    }

    let mut truth = vec![vec![false; properties.len()]; concepts.len()];
    for (p, hs) in holders.iter().enumerate() {
        for c in hs {
            truth[c.0][p] = true;
        }
    }
    let mut positives = Vec::new();
    let mut candidates = Vec::new();
    for (c, row) in truth.iter().enumerate() {
        for (p, &t) in row.iter().enumerate() {
            if t {
                positives.push((c, p));
            } else {
                candidates.push((c, p));
            }
        }
    }
    let n_neg = (spec.negative_ratio * positives.len() as f64).round() as usize;
    if n_neg > candidates.len() {
        return Err(Error::Generation(format!(
            "negative_ratio asks for {n_neg} false beliefs but only {} unlinked pairs exist",
            candidates.len()
        )));
    }
    let negatives: BTreeSet<(usize, usize)> = candidates.choose_multiple(&mut rng, n_neg).copied().collect();

    let mut beliefs: Vec<Belief> = positives
        .iter()
        .map(|&(c, p)| (c, p, true))
        .chain(negatives.iter().map(|&(c, p)| (c, p, false)))
        .map(|(c, p, label)| Belief {
            concept: ConceptId(c),
            property: PropertyId(p),
            label,
        })
        .collect();
    beliefs.sort_by_key(|b| (b.concept, b.property));

    let bank = BeliefBank::new(concepts, properties, beliefs)?;
    Ok((bank, taxonomy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(branching: usize, depth: usize, ppn: usize, cc: usize) -> TaxonomySpec {
        TaxonomySpec {
            branching,
            depth,
            props_per_node: ppn,
            cross_cutting_props: cc,
            ..TaxonomySpec::default()
        }
    }

    #[test]
    fn closed_form_counts() {
        let s = spec(2, 2, 2, 0);
        let (bank, tax) = generate_taxonomic_bank(&s).unwrap();
        assert_eq!(bank.num_concepts(), 4);
        assert_eq!(tax.nodes().len(), 7);
        assert_eq!(s.node_count(), Some(7));
        assert_eq!(bank.num_properties(), 14);
    }

    #[test]
    fn each_concept_holds_its_path() {
        let (bank, tax) = generate_taxonomic_bank(&spec(3, 2, 1, 0)).unwrap();
        for c in bank.concept_ids() {
            assert_eq!(bank.true_set(c).unwrap().len(), 3);
            assert_eq!(tax.depth(tax.leaf_of(c).unwrap()), 2);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let s = TaxonomySpec {
            seed: 11,
            ..TaxonomySpec::default()
        };
        let (a, ta) = generate_taxonomic_bank(&s).unwrap();
        let (b, tb) = generate_taxonomic_bank(&s).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(ta.to_text(), tb.to_text());
        let (c, _) = generate_taxonomic_bank(&TaxonomySpec { seed: 12, ..s }).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn negatives_follow_ratio() {
        let (bank, _) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let t = bank.beliefs().iter().filter(|b| b.label).count();
        let f = bank.beliefs().len() - t;
        assert_eq!(t, f);
        let s = TaxonomySpec {
            negative_ratio: 0.5,
            ..TaxonomySpec::default()
        };
        let (bank, _) = generate_taxonomic_bank(&s).unwrap();
        let t = bank.beliefs().iter().filter(|b| b.label).count();
        let f = bank.beliefs().len() - t;
        assert_eq!(f, (0.5 * t as f64).round() as usize);
    }

    #[test]
    fn cross_cutting_spans_two_branches() {
        let s = TaxonomySpec {
            cross_cutting_props: 4,
            seed: 3,
            ..TaxonomySpec::default()
        };
        let (bank, tax) = generate_taxonomic_bank(&s).unwrap();
        for p in bank.properties().iter().filter(|p| p.name.starts_with('x')) {
            let hs = bank.holders(p.id).unwrap();
            assert_eq!(hs.len(), s.cross_cutting_size());
            let branches: BTreeSet<_> = hs.iter().map(|&c| tax.top_level_branch(c).unwrap()).collect();
            assert!(branches.len() >= 2);
        }
    }

    #[test]
    fn tiny_cross_cutting_subset_is_a_generation_error() {
        let s = TaxonomySpec {
            cross_cutting_coverage: 0.1,
            ..spec(2, 1, 1, 1)
        };
        assert!(matches!(generate_taxonomic_bank(&s), Err(Error::Generation(_))));
    }

    #[test]
    fn impossible_negative_ratio() {
        let s = TaxonomySpec {
            negative_ratio: 10.0,
            ..spec(2, 1, 1, 0)
        };
        assert!(matches!(generate_taxonomic_bank(&s), Err(Error::Generation(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(1, 2, 1, 0).validate().is_err());
        assert!(spec(2, 0, 1, 0).validate().is_err());
        assert!(spec(2, 2, 0, 0).validate().is_err());
        assert!(TaxonomySpec {
            cross_cutting_coverage: 1.0,
            ..TaxonomySpec::default()
        }
        .validate()
        .is_err());
        assert!(TaxonomySpec {
            negative_ratio: 0.0,
            ..TaxonomySpec::default()
        }
        .validate()
        .is_err());
        assert!(spec(10, 40, 1, 0).validate().is_err());
    }
}
