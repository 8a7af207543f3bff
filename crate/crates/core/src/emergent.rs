//! Generalization along features that cut across the taxonomy.
//!
//! A probe teaches a nonce property on some holders of a Known feature and
//! asks whether the remaining holders outrank the non-holders afterwards.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::classifier::ModelParams;
use crate::corpus::{BeliefBank, ConceptId, PropertyId, PropertyKind, Taxonomy};
use crate::induction::{premise_set_label, run_experiment, GeneralizationRecord, InductionConfig};
use crate::rng::seeded_rng;
use crate::stats::auc;
use crate::{Error, Result};

fn branches(taxonomy: &Taxonomy, concepts: &[ConceptId]) -> Result<BTreeSet<usize>> {
    concepts.iter().map(|&c| Ok(taxonomy.top_level_branch(c)?.0)).collect()
}

/// Known properties held by at least `min_holders` concepts across two or
/// more top-level branches, most holders first, then by id.
///
/// Properties held by every concept are left out: they carry no contrast
/// between holders and non-holders.
pub fn find_emergent_features(bank: &BeliefBank, taxonomy: &Taxonomy, min_holders: usize) -> Result<Vec<PropertyId>> {
    let mut found = Vec::new();
    for p in bank.properties().iter().filter(|p| p.kind == PropertyKind::Known) {
        let holders = bank.holders(p.id)?;
        if holders.len() >= min_holders.max(1)
            && holders.len() < bank.num_concepts()
            && branches(taxonomy, &holders)?.len() >= 2
        {
            found.push((holders.len(), p.id));
        }
    }
    found.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// First property whose holders are exactly the leaves of a top-level branch
/// with at least three leaves. Used as a positive control.
pub fn control_feature(bank: &BeliefBank, taxonomy: &Taxonomy) -> Result<Option<PropertyId>> {
    for &branch in taxonomy.children(taxonomy.root()) {
        let leaves = taxonomy.concepts_under(branch)?;
        if leaves.len() < 3 {
            continue;
        }
        for p in bank.properties().iter().filter(|p| p.kind == PropertyKind::Known) {
            if bank.holders(p.id)? == leaves {
                return Ok(Some(p.id));
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmergentProbe {
    pub feature: PropertyId,
    pub premises: Vec<ConceptId>,
    /// Holders of the feature outside the premise set.
    pub holders: Vec<ConceptId>,
    pub non_holders: Vec<ConceptId>,
}

impl EmergentProbe {
    /// Probe on a cross-cutting feature with an explicit premise subset.
    pub fn new(bank: &BeliefBank, taxonomy: &Taxonomy, feature: PropertyId, premises: &[ConceptId]) -> Result<Self> {
        let all = bank.holders(feature)?;
        if branches(taxonomy, &all)?.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "holders of {} lie in a single top-level branch",
                bank.property(feature)?.name
            )));
        }
        Self::build(bank, feature, premises)
    }

    /// Probe with the first half (rounded up) of the holders, chosen with `seed`.
    pub fn with_default_premises(
        bank: &BeliefBank,
        taxonomy: &Taxonomy,
        feature: PropertyId,
        seed: u64,
    ) -> Result<Self> {
        Self::new(bank, taxonomy, feature, &default_premises(bank, feature, seed)?)
    }

    /// Like [`EmergentProbe::with_default_premises`] but without the
    /// cross-branch requirement, for taxonomy-branch controls.
    pub fn control(bank: &BeliefBank, feature: PropertyId, seed: u64) -> Result<Self> {
        Self::build(bank, feature, &default_premises(bank, feature, seed)?)
    }

    fn build(bank: &BeliefBank, feature: PropertyId, premises: &[ConceptId]) -> Result<Self> {
        if bank.property(feature)?.kind != PropertyKind::Known {
            return Err(Error::InvalidArgument(
                "emergent feature must be a Known property".into(),
            ));
        }
        if premises.is_empty() {
            return Err(Error::InvalidArgument("probe premise set is empty".into()));
        }
        let holders: BTreeSet<ConceptId> = bank.holders(feature)?.into_iter().collect();
        let premise_set: BTreeSet<ConceptId> = premises.iter().copied().collect();
        if let Some(c) = premise_set.iter().find(|c| !holders.contains(c)) {
            return Err(Error::InvalidArgument(format!(
                "premise {} does not hold {}",
                bank.concept(*c)?.name,
                bank.property(feature)?.name
            )));
        }
        let (held_out, non_holders): (Vec<_>, Vec<_>) = bank
            .concept_ids()
            .filter(|c| !premise_set.contains(c))
            .partition(|c| holders.contains(c));
        Ok(Self {
            feature,
            premises: premise_set.into_iter().collect(),
            holders: held_out,
            non_holders,
        })
    }
}

fn default_premises(bank: &BeliefBank, feature: PropertyId, seed: u64) -> Result<Vec<ConceptId>> {
    let holders = bank.holders(feature)?;
    let k = holders.len().div_ceil(2);
    let mut picked: Vec<_> = holders.choose_multiple(&mut seeded_rng(seed), k).copied().collect();
    picked.sort();
    Ok(picked)
}

fn check_holdout(probe: &EmergentProbe) -> Result<()> {
    if probe.holders.is_empty() || probe.non_holders.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "probe holdout has {} holders and {} non-holders; both are needed",
            probe.holders.len(),
            probe.non_holders.len()
        )));
    }
    Ok(())
}

/// AUC of held-out holders against non-holders under `scores` (by concept id).
pub fn probe_auc(probe: &EmergentProbe, scores: &[f64]) -> Result<f64> {
    check_holdout(probe)?;
    let pick = |cs: &[ConceptId]| cs.iter().map(|c| scores[c.index()]).collect::<Vec<_>>();
    auc(&pick(&probe.holders), &pick(&probe.non_holders))
}

/// Induces `nonce` on the probe premises from a copy of `snapshot` and scores
/// the holdout.
pub fn emergent_auc(
    snapshot: &ModelParams,
    bank: &BeliefBank,
    probe: &EmergentProbe,
    nonce: PropertyId,
    cfg: &InductionConfig,
) -> Result<(f64, GeneralizationRecord)> {
    check_holdout(probe)?;
    let record = run_experiment(snapshot, bank, nonce, std::slice::from_ref(&probe.premises), cfg)?
        .pop()
        .expect("one premise set");
    Ok((probe_auc(probe, &record.scores)?, record))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub probe_id: String,
    pub probe: EmergentProbe,
    pub auc: f64,
}

/// `probe_id,feature,premises,auc,n_holders,n_nonholders`; holder counts are
/// for the holdout.
pub fn emergent_csv(results: &[ProbeResult], bank: &BeliefBank) -> Result<String> {
    let mut out = String::from("probe_id,feature,premises,auc,n_holders,n_nonholders\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.probe_id,
            bank.property(r.probe.feature)?.name,
            premise_set_label(bank, &r.probe.premises)?,
            r.auc,
            r.probe.holders.len(),
            r.probe.non_holders.len()
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_taxonomic_bank, TaxonomySpec};

    #[test]
    fn finds_exactly_the_cross_cutting_properties() {
        let (bank, tax) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let found = find_emergent_features(&bank, &tax, 2).unwrap();
        let mut names: Vec<_> = found.iter().map(|&p| bank.property(p).unwrap().name.clone()).collect();
        names.sort();
        assert_eq!(names, ["x0", "x1"]);
        assert!(find_emergent_features(&bank, &tax, 100).unwrap().is_empty());

        let spec = TaxonomySpec {
            cross_cutting_props: 0,
            ..TaxonomySpec::default()
        };
        let (bank, tax) = generate_taxonomic_bank(&spec).unwrap();
        assert!(find_emergent_features(&bank, &tax, 1).unwrap().is_empty());
    }

    #[test]
    fn default_probe_invariants() {
        let (bank, tax) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let feature = find_emergent_features(&bank, &tax, 2).unwrap()[0];
        let probe = EmergentProbe::with_default_premises(&bank, &tax, feature, 3).unwrap();
        let holders = bank.holders(feature).unwrap();
        assert_eq!(probe.premises.len(), holders.len().div_ceil(2));
        assert!(probe.premises.iter().all(|c| holders.contains(c)));
        assert!(probe
            .premises
            .iter()
            .all(|c| !probe.holders.contains(c) && !probe.non_holders.contains(c)));
        assert_eq!(
            probe.premises.len() + probe.holders.len() + probe.non_holders.len(),
            bank.num_concepts()
        );
        assert_eq!(
            probe,
            EmergentProbe::with_default_premises(&bank, &tax, feature, 3).unwrap()
        );
    }

    #[test]
    fn control_feature_is_a_branch_property() {
        let (bank, tax) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let p = control_feature(&bank, &tax).unwrap().unwrap();
        assert_eq!(bank.holders(p).unwrap().len(), 3);
        assert!(EmergentProbe::with_default_premises(&bank, &tax, p, 0).is_err());
        let probe = EmergentProbe::control(&bank, p, 0).unwrap();
        assert_eq!(
            (probe.premises.len(), probe.holders.len(), probe.non_holders.len()),
            (2, 1, 6)
        );
    }

    #[test]
    fn auc_edge_cases() {
        let (bank, tax) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let feature = find_emergent_features(&bank, &tax, 2).unwrap()[0];
        let probe = EmergentProbe::with_default_premises(&bank, &tax, feature, 0).unwrap();
        let mut scores = vec![0.1; bank.num_concepts()];
        for c in &probe.holders {
            scores[c.index()] = 0.9;
        }
        assert_eq!(probe_auc(&probe, &scores).unwrap(), 1.0);
        assert_eq!(probe_auc(&probe, &vec![0.4; bank.num_concepts()]).unwrap(), 0.5);

        let all: Vec<_> = bank.holders(feature).unwrap();
        let no_holdout = EmergentProbe::new(&bank, &tax, feature, &all).unwrap();
        assert!(probe_auc(&no_holdout, &scores).is_err());
        assert!(EmergentProbe::new(&bank, &tax, feature, &[]).is_err());
    }
}
