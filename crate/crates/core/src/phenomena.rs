//! Effect battery over generalization records.
//!
//! Each effect has a pure form that reads records already produced and, for
//! diversity and monotonicity, a wrapper that samples premise sets and runs
//! the inductions. Sampling is seeded and exhaustive when the space of
//! candidates is no larger than the requested count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::classifier::ModelParams;
use crate::corpus::{jaccard, BeliefBank, ConceptId, NodeId, PropertyId, PropertyKind, SimilarityOracle, Taxonomy};
use crate::geometry::SimilarityMatrix;
use crate::induction::{premise_set_label, run_experiment, GeneralizationRecord, InductionConfig};
use crate::rng::seeded_rng;
use crate::stats::Statistic;
use crate::{Error, Result};

pub use crate::stats::spearman;

#[derive(Clone, Debug, PartialEq)]
pub struct EffectReport {
    pub name: String,
    pub statistic: f64,
    /// Number of comparisons behind the statistic.
    pub support: usize,
    pub detail_header: String,
    pub detail: Vec<String>,
}

impl EffectReport {
    pub fn detail_csv(&self) -> String {
        let mut out = format!("{}\n", self.detail_header);
        for row in &self.detail {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

/// Rho between `G[a][b]` and Jaccard similarity, pooled over `a != b`.
///
/// A premise row whose own rho is undefined (constant scores) is reported as
/// such in the detail and left out of the pooled statistic.
pub fn similarity_effect(g: &SimilarityMatrix, bank: &BeliefBank) -> Result<EffectReport> {
    let n = g.n();
    if n < 3 || n != bank.num_concepts() {
        return Err(Error::InvalidArgument(format!(
            "similarity effect needs a complete matrix over >= 3 concepts (matrix {n}, bank {})",
            bank.num_concepts()
        )));
    }
    let oracle = SimilarityOracle::new(bank);
    let mut pooled_g = Vec::new();
    let mut pooled_j = Vec::new();
    let mut detail = Vec::with_capacity(n);
    for a in 0..n {
        let mut gs = Vec::with_capacity(n - 1);
        let mut js = Vec::with_capacity(n - 1);
        for b in (0..n).filter(|&b| b != a) {
            gs.push(g.get(a, b));
            js.push(oracle.similarity(ConceptId(a), ConceptId(b))?);
        }
        let rho = Statistic::from_result(spearman(&gs, &js))?;
        if rho.value().is_some() {
            pooled_g.extend(gs);
            pooled_j.extend(js);
        }
        detail.push(format!("{},{rho}", bank.concept(ConceptId(a))?.name));
    }
    let statistic = spearman(&pooled_g, &pooled_j)?;
    Ok(EffectReport {
        name: "similarity".into(),
        statistic,
        support: pooled_g.len(),
        detail_header: "premise,rho".into(),
        detail,
    })
}

fn members(taxonomy: &Taxonomy, category: NodeId) -> Result<Vec<ConceptId>> {
    taxonomy.concepts_under(category)
}

fn known_true_set(bank: &BeliefBank, c: ConceptId) -> Result<BTreeSet<PropertyId>> {
    bank.true_set(c)
}

/// Majority-property prototype of a category: Known properties held by more
/// than half of its leaves.
pub fn prototype(bank: &BeliefBank, taxonomy: &Taxonomy, category: NodeId) -> Result<BTreeSet<PropertyId>> {
    let leaves = members(taxonomy, category)?;
    let mut counts: BTreeMap<PropertyId, usize> = BTreeMap::new();
    for &c in &leaves {
        for p in known_true_set(bank, c)? {
            *counts.entry(p).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter(|&(_, k)| 2 * k > leaves.len())
        .map(|(p, _)| p)
        .collect())
}

/// Jaccard similarity of a concept's Known true-set to its category prototype.
pub fn typicality(bank: &BeliefBank, taxonomy: &Taxonomy, concept: ConceptId, category: NodeId) -> Result<f64> {
    if !taxonomy.is_under(concept, category)? {
        return Err(Error::InvalidArgument(format!(
            "{} is not a member of {}",
            bank.concept(concept)?.name,
            taxonomy.node(category)?.name
        )));
    }
    Ok(jaccard(
        &known_true_set(bank, concept)?,
        &prototype(bank, taxonomy, category)?,
    ))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, k) = values.fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    sum / k as f64
}

/// Rho between typicality of `a` and mean generalization from `{a}` to the
/// other category members.
pub fn typicality_effect(
    records: &[GeneralizationRecord],
    bank: &BeliefBank,
    taxonomy: &Taxonomy,
    category: NodeId,
) -> Result<EffectReport> {
    let cat = members(taxonomy, category)?;
    let mut seen = BTreeSet::new();
    let (mut typ, mut gen, mut detail) = (Vec::new(), Vec::new(), Vec::new());
    for r in records {
        let [a] = r.premises[..] else { continue };
        if !cat.contains(&a) || !seen.insert(a) {
            continue;
        }
        let t = typicality(bank, taxonomy, a, category)?;
        let g = mean(cat.iter().filter(|&&b| b != a).map(|b| r.scores[b.index()]));
        detail.push(format!("{},{t},{g}", bank.concept(a)?.name));
        typ.push(t);
        gen.push(g);
    }
    if typ.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "typicality effect needs >= 3 category members with records, got {}",
            typ.len()
        )));
    }
    Ok(EffectReport {
        name: "typicality".into(),
        statistic: spearman(&typ, &gen)?,
        support: typ.len(),
        detail_header: "concept,typicality,mean_generalization".into(),
        detail,
    })
}

fn category_members(taxonomy: &Taxonomy, category: NodeId) -> Result<Vec<ConceptId>> {
    let m = members(taxonomy, category)?;
    if m.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "category {} has {} leaves, need at least 4",
            taxonomy.node(category)?.name,
            m.len()
        )));
    }
    Ok(m)
}

/// Takes `count` items from `all` with a seeded draw, or all of them if there
/// are no more than `count`. The result is sorted.
fn sample_or_all<T: Clone + Ord>(all: Vec<T>, count: usize, seed: u64) -> Vec<T> {
    if all.len() <= count {
        return all;
    }
    let mut picked: Vec<T> = all.choose_multiple(&mut seeded_rng(seed), count).cloned().collect();
    picked.sort();
    picked
}

/// Premise pairs for the diversity effect, sorted.
pub fn diversity_pairs(taxonomy: &Taxonomy, category: NodeId, pairs: usize, seed: u64) -> Result<Vec<[ConceptId; 2]>> {
    if pairs < 2 {
        return Err(Error::InvalidArgument("diversity effect needs at least 2 pairs".into()));
    }
    let m = category_members(taxonomy, category)?;
    let mut all = Vec::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            all.push([m[i], m[j]]);
        }
    }
    Ok(sample_or_all(all, pairs, seed))
}

/// Nested premise chains `{a} ⊂ {a,b} ⊂ {a,b,c}`, as triples `[a, b, c]`, sorted.
pub fn monotonicity_chains(
    taxonomy: &Taxonomy,
    category: NodeId,
    chains: usize,
    seed: u64,
) -> Result<Vec<[ConceptId; 3]>> {
    if chains == 0 {
        return Err(Error::InvalidArgument(
            "monotonicity effect needs at least 1 chain".into(),
        ));
    }
    let m = category_members(taxonomy, category)?;
    let mut all = Vec::new();
    for &a in &m {
        for &b in &m {
            for &c in &m {
                if a != b && a != c && b != c {
                    all.push([a, b, c]);
                }
            }
        }
    }
    Ok(sample_or_all(all, chains, seed))
}

fn sorted(set: &[ConceptId]) -> Vec<ConceptId> {
    let mut v = set.to_vec();
    v.sort();
    v
}

fn index_records(records: &[GeneralizationRecord]) -> BTreeMap<Vec<ConceptId>, &GeneralizationRecord> {
    let mut map = BTreeMap::new();
    for r in records {
        map.entry(r.premises.clone()).or_insert(r);
    }
    map
}

fn lookup<'a>(
    index: &BTreeMap<Vec<ConceptId>, &'a GeneralizationRecord>,
    bank: &BeliefBank,
    set: &[ConceptId],
) -> Result<&'a GeneralizationRecord> {
    index.get(&sorted(set)).copied().ok_or_else(|| {
        Error::Validation(format!(
            "no record for premise set {}",
            premise_set_label(bank, set).unwrap_or_default()
        ))
    })
}

/// Premise sets induced by the diversity and monotonicity effects, deduplicated.
pub fn battery_premise_sets(pairs: &[[ConceptId; 2]], chains: &[[ConceptId; 3]]) -> Vec<Vec<ConceptId>> {
    let mut sets = BTreeSet::new();
    for p in pairs {
        sets.insert(sorted(p));
    }
    for &[a, b, c] in chains {
        sets.insert(vec![a]);
        sets.insert(sorted(&[a, b]));
        sets.insert(sorted(&[a, b, c]));
    }
    sets.into_iter().collect()
}

/// Mean generalization from diverse pairs minus that from similar pairs.
///
/// Pairs are ranked by Jaccard similarity of their members (ties by pair);
/// the lower half is "diverse", the upper half "similar", and with an odd
/// count the middle pair sits out. Strength is the mean score over category
/// members outside the pair.
pub fn diversity_from_records(
    pairs: &[[ConceptId; 2]],
    records: &[GeneralizationRecord],
    bank: &BeliefBank,
    taxonomy: &Taxonomy,
    category: NodeId,
) -> Result<EffectReport> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument("diversity effect needs at least 2 pairs".into()));
    }
    let cat = category_members(taxonomy, category)?;
    let index = index_records(records);
    let oracle = SimilarityOracle::new(bank);
    let mut rows = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let r = lookup(&index, bank, pair)?;
        let sim = oracle.similarity(pair[0], pair[1])?;
        let strength = mean(cat.iter().filter(|b| !pair.contains(b)).map(|b| r.scores[b.index()]));
        rows.push((sim, sorted(pair), strength));
    }
    rows.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
    let half = rows.len() / 2;
    let diverse = mean(rows[..half].iter().map(|r| r.2));
    let similar = mean(rows[rows.len() - half..].iter().map(|r| r.2));
    let mut detail = Vec::with_capacity(rows.len());
    for (i, (sim, pair, strength)) in rows.iter().enumerate() {
        let group = if i < half {
            "diverse"
        } else if i >= rows.len() - half {
            "similar"
        } else {
            "middle"
        };
        detail.push(format!("{},{sim},{strength},{group}", premise_set_label(bank, pair)?));
    }
    Ok(EffectReport {
        name: "diversity".into(),
        statistic: diverse - similar,
        support: 2 * half,
        detail_header: "premise_set,jaccard,mean_generalization,group".into(),
        detail,
    })
}

/// Fraction of (chain, held-out member) cases with non-decreasing scores
/// along the chain.
pub fn monotonicity_from_records(
    chains: &[[ConceptId; 3]],
    records: &[GeneralizationRecord],
    bank: &BeliefBank,
    taxonomy: &Taxonomy,
    category: NodeId,
) -> Result<EffectReport> {
    if chains.is_empty() {
        return Err(Error::InvalidArgument(
            "monotonicity effect needs at least 1 chain".into(),
        ));
    }
    let cat = category_members(taxonomy, category)?;
    let index = index_records(records);
    let (mut hits, mut cases) = (0usize, 0usize);
    let mut detail = Vec::new();
    for &[a, b, c] in chains {
        let sets = [vec![a], vec![a, b], vec![a, b, c]];
        let recs = [
            lookup(&index, bank, &sets[0])?,
            lookup(&index, bank, &sets[1])?,
            lookup(&index, bank, &sets[2])?,
        ];
        let labels = [
            premise_set_label(bank, &sets[0])?,
            premise_set_label(bank, &sets[1])?,
            premise_set_label(bank, &sets[2])?,
        ];
        for &x in cat.iter().filter(|x| ![a, b, c].contains(x)) {
            let g = recs.map(|r| r.scores[x.index()]);
            let ok = g[0] <= g[1] && g[1] <= g[2];
            hits += ok as usize;
            cases += 1;
            let _ = write!(
                detail_row(&mut detail),
                "{},{},{},{},{},{},{},{ok}",
                labels[0],
                labels[1],
                labels[2],
                bank.concept(x)?.name,
                g[0],
                g[1],
                g[2]
            );
        }
    }
    Ok(EffectReport {
        name: "monotonicity".into(),
        statistic: hits as f64 / cases as f64,
        support: cases,
        detail_header: "s1,s2,s3,conclusion,g1,g2,g3,monotone".into(),
        detail,
    })
}

fn detail_row(detail: &mut Vec<String>) -> &mut String {
    detail.push(String::new());
    detail.last_mut().expect("just pushed")
}

fn check_battery_nonce(bank: &BeliefBank, nonce: PropertyId) -> Result<()> {
    if bank.property(nonce)?.kind != PropertyKind::Nonce {
        return Err(Error::InvalidArgument("battery effects need a nonce property".into()));
    }
    Ok(())
}

/// Samples premise pairs, runs the inductions and computes the diversity effect.
#[allow(clippy::too_many_arguments)]
pub fn diversity_effect(
    snapshot: &ModelParams,
    bank: &BeliefBank,
    taxonomy: &Taxonomy,
    category: NodeId,
    pairs: usize,
    seed: u64,
    nonce: PropertyId,
    cfg: &InductionConfig,
) -> Result<(EffectReport, Vec<GeneralizationRecord>)> {
    check_battery_nonce(bank, nonce)?;
    let sampled = diversity_pairs(taxonomy, category, pairs, seed)?;
    let sets = battery_premise_sets(&sampled, &[]);
    let records = run_experiment(snapshot, bank, nonce, &sets, cfg)?;
    let report = diversity_from_records(&sampled, &records, bank, taxonomy, category)?;
    Ok((report, records))
}

/// Samples nested chains, runs the inductions and computes the monotonicity effect.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_effect(
    snapshot: &ModelParams,
    bank: &BeliefBank,
    taxonomy: &Taxonomy,
    category: NodeId,
    chains: usize,
    seed: u64,
    nonce: PropertyId,
    cfg: &InductionConfig,
) -> Result<(EffectReport, Vec<GeneralizationRecord>)> {
    check_battery_nonce(bank, nonce)?;
    let sampled = monotonicity_chains(taxonomy, category, chains, seed)?;
    let sets = battery_premise_sets(&[], &sampled);
    let records = run_experiment(snapshot, bank, nonce, &sets, cfg)?;
    let report = monotonicity_from_records(&sampled, &records, bank, taxonomy, category)?;
    Ok((report, records))
}
