//! Nonce-property induction.
//!
//! A nonce property is taught on a premise set by repeated gradient steps on
//! the mean cross-entropy of `(premise, nonce, true)` until every premise
//! scores at least `tau`. The weights are then frozen and the nonce property
//! is scored for every concept in the bank.

mod records;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use records::{parse_records, premise_set_label, write_records, RecordFiles};

use crate::classifier::{ModelParams, RowInit, Rows, UpdateMask};
use crate::corpus::{BeliefBank, ConceptId, PropertyId, PropertyKind};
use crate::digest::sha256_hex;
use crate::{Error, Result};

/// Parameters an induction step may update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Full,
    NonceRowOnly,
    EmbeddingsOnly,
}

impl Scope {
    fn mask(self, nonce: PropertyId) -> UpdateMask {
        match self {
            Scope::Full => UpdateMask::ALL,
            Scope::NonceRowOnly => UpdateMask {
                concepts: false,
                properties: Rows::Only(nonce),
                combiner: false,
            },
            Scope::EmbeddingsOnly => UpdateMask {
                concepts: true,
                properties: Rows::All,
                combiner: false,
            },
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Full => "full",
            Scope::NonceRowOnly => "nonce-row-only",
            Scope::EmbeddingsOnly => "embeddings-only",
        })
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scope::Full),
            "nonce-row-only" => Ok(Scope::NonceRowOnly),
            "embeddings-only" => Ok(Scope::EmbeddingsOnly),
            other => Err(Error::Config(format!(
                "unknown scope {other:?} (full, nonce-row-only, embeddings-only)"
            ))),
        }
    }
}

impl fmt::Display for RowInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowInit::Zero => f.write_str("zero"),
            RowInit::SeededRandom(seed) => write!(f, "random:{seed}"),
            RowInit::MeanOfKnown => f.write_str("mean-of-known"),
        }
    }
}

impl FromStr for RowInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(RowInit::Zero),
            "mean-of-known" => Ok(RowInit::MeanOfKnown),
            other => other
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(RowInit::SeededRandom)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown row init {other:?} (zero, mean-of-known, random:<seed>)"
                    ))
                }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InductionConfig {
    pub lr: f64,
    pub max_steps: usize,
    /// Every premise must score at least `tau` for the criterion to hold.
    pub tau: f64,
    pub scope: Scope,
    pub init: RowInit,
}

impl Default for InductionConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            max_steps: 500,
            tau: 0.9,
            scope: Scope::Full,
            init: RowInit::MeanOfKnown,
        }
    }
}

impl InductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0 && self.lr <= 10.0) {
            return Err(Error::Config(format!("induction lr {} outside (0, 10]", self.lr)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if !(self.tau > 0.5 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} outside (0.5, 1)", self.tau)));
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        format!(
            "lr={};max_steps={};tau={};scope={};init={}",
            self.lr, self.max_steps, self.tau, self.scope, self.init
        )
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

/// Loss and premise probabilities evaluated before each gradient step.
///
/// Row `k` describes the parameters after `k` updates. When the criterion is
/// reached at row `k` no further update is made and `steps_to_criterion` is
/// `Some(k)`; otherwise `max_steps` updates are made, `max_steps + 1` rows are
/// recorded and the field is `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct InductionTrace {
    pub losses: Vec<f64>,
    pub premise_probs: Vec<Vec<f64>>,
    pub steps_to_criterion: Option<usize>,
}

impl InductionTrace {
    pub fn reached(&self) -> bool {
        self.steps_to_criterion.is_some()
    }

    pub fn min_premise_prob(&self, step: usize) -> f64 {
        self.premise_probs[step].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Post-induction probability of the nonce property for every concept.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizationRecord {
    /// Sorted, duplicate-free.
    pub premises: Vec<ConceptId>,
    pub nonce: PropertyId,
    /// Indexed by concept id.
    pub scores: Vec<f64>,
    pub trace: InductionTrace,
    pub config_digest: String,
}

fn normalize_premises(bank: &BeliefBank, premises: &[ConceptId]) -> Result<Vec<ConceptId>> {
    if premises.is_empty() {
        return Err(Error::InvalidArgument("premise set is empty".into()));
    }
    let mut set = premises.to_vec();
    for &c in &set {
        bank.concept(c)?;
    }
    set.sort();
    set.dedup();
    Ok(set)
}

fn check_nonce(params: &ModelParams, bank: &BeliefBank, nonce: PropertyId) -> Result<()> {
    if bank.property(nonce)?.kind != PropertyKind::Nonce {
        return Err(Error::InvalidArgument(format!(
            "property {} is not a nonce property",
            bank.property(nonce)?.name
        )));
    }
    if nonce.0 >= params.num_property_rows() {
        return Err(Error::InvalidArgument(format!(
            "nonce property {} has no embedding row",
            bank.property(nonce)?.name
        )));
    }
    if params.num_concepts() != bank.num_concepts() {
        return Err(Error::Validation("model and bank disagree on the concept count".into()));
    }
    Ok(())
}

/// Teaches `nonce` on `premises`, starting from a copy of `params`.
pub fn induce(
    params: &ModelParams,
    bank: &BeliefBank,
    premises: &[ConceptId],
    nonce: PropertyId,
    cfg: &InductionConfig,
) -> Result<(ModelParams, InductionTrace)> {
    cfg.validate()?;
    let premises = normalize_premises(bank, premises)?;
    check_nonce(params, bank, nonce)?;

    let examples: Vec<_> = premises.iter().map(|&c| (c, nonce, true)).collect();
    let mask = cfg.scope.mask(nonce);
    let mut params = params.clone();
    let mut trace = InductionTrace {
        losses: Vec::new(),
        premise_probs: Vec::new(),
        steps_to_criterion: None,
    };
    for step in 0..=cfg.max_steps {
        let batch = params.batch_step(&examples).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence {
                stage: "induction step",
                at: step,
            },
            other => other,
        })?;
        if !batch.loss.is_finite() {
            return Err(Error::Divergence {
                stage: "induction step",
                at: step,
            });
        }
        trace.losses.push(batch.loss);
        let done = batch.probabilities.iter().all(|&p| p >= cfg.tau);
        trace.premise_probs.push(batch.probabilities);
        if done {
            trace.steps_to_criterion = Some(step);
            break;
        }
        if step == cfg.max_steps {
            break;
        }
        params.apply_gradients(&batch.grads, cfg.lr, mask);
        if !params.is_finite() {
            return Err(Error::Divergence {
                stage: "induction step",
                at: step + 1,
            });
        }
    }
    Ok((params, trace))
}

/// Frozen forward-pass probability of `nonce` for every concept, by id.
pub fn generalize(params: &ModelParams, nonce: PropertyId, bank: &BeliefBank) -> Result<Vec<f64>> {
    if params.num_concepts() != bank.num_concepts() {
        return Err(Error::Validation("model and bank disagree on the concept count".into()));
    }
    bank.property(nonce)?;
    let pairs: Vec<_> = bank.concept_ids().map(|c| (c, nonce)).collect();
    params.score_pairs(&pairs)
}

/// Runs one induction per premise set, each from its own copy of `snapshot`.
///
/// If `snapshot` has no row for `nonce` yet, one is added first with
/// `cfg.init`. Runs execute on the current rayon pool; results keep input
/// order.
pub fn run_experiment(
    snapshot: &ModelParams,
    bank: &BeliefBank,
    nonce: PropertyId,
    premise_sets: &[Vec<ConceptId>],
    cfg: &InductionConfig,
) -> Result<Vec<GeneralizationRecord>> {
    cfg.validate()?;
    let mut base = snapshot.clone();
    if nonce.0 == base.num_property_rows() {
        base.add_property_row(bank, cfg.init)?;
    }
    check_nonce(&base, bank, nonce)?;
    let digest = cfg.digest();
    premise_sets
        .par_iter()
        .map(|premises| {
            let (induced, trace) = induce(&base, bank, premises, nonce, cfg)?;
            Ok(GeneralizationRecord {
                premises: normalize_premises(bank, premises)?,
                nonce,
                scores: generalize(&induced, nonce, bank)?,
                trace,
                config_digest: digest.clone(),
            })
        })
        .collect()
}

/// One singleton premise set per concept, in id order.
pub fn singleton_sets(bank: &BeliefBank) -> Vec<Vec<ConceptId>> {
    bank.concept_ids().map(|c| vec![c]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ModelConfig;
    use crate::corpus::{generate_taxonomic_bank, TaxonomySpec};
    use crate::pretrain::{pretrain, TrainConfig};

    fn smoke(seed: u64) -> (BeliefBank, ModelParams, PropertyId) {
        let (bank, _) = generate_taxonomic_bank(&TaxonomySpec {
            seed,
            ..TaxonomySpec::default()
        })
        .unwrap();
        let params = ModelParams::init(
            &bank,
            &ModelConfig {
                seed,
                ..ModelConfig::default()
            },
        )
        .unwrap();
        let (trained, _) = pretrain(&params, &bank, &TrainConfig::default()).unwrap();
        let (bank, nonce) = bank.mint_nonce("queem").unwrap();
        (bank, trained, nonce)
    }

    fn with_row(params: &ModelParams, bank: &BeliefBank) -> ModelParams {
        let mut p = params.clone();
        p.add_property_row(bank, RowInit::MeanOfKnown).unwrap();
        p
    }

    #[test]
    fn config_validation_and_parsing() {
        assert!(InductionConfig {
            tau: 0.4,
            ..InductionConfig::default()
        }
        .validate()
        .is_err());
        assert!(InductionConfig {
            tau: 0.5,
            ..InductionConfig::default()
        }
        .validate()
        .is_err());
        assert!(InductionConfig {
            max_steps: 0,
            ..InductionConfig::default()
        }
        .validate()
        .is_err());
        for s in ["full", "nonce-row-only", "embeddings-only"] {
            assert_eq!(s.parse::<Scope>().unwrap().to_string(), s);
        }
        for s in ["zero", "mean-of-known", "random:17"] {
            assert_eq!(s.parse::<RowInit>().unwrap().to_string(), s);
        }
        assert!("random:x".parse::<RowInit>().is_err());
        assert_ne!(
            InductionConfig::default().digest(),
            InductionConfig {
                tau: 0.95,
                ..InductionConfig::default()
            }
            .digest()
        );
    }

    #[test]
    fn single_premise_reaches_criterion() {
        let (bank, params, nonce) = smoke(1);
        let params = with_row(&params, &bank);
        let (induced, trace) = induce(&params, &bank, &[ConceptId(0)], nonce, &InductionConfig::default()).unwrap();
        let steps = trace.steps_to_criterion.expect("criterion reached");
        assert!(steps >= 1);
        assert_eq!(trace.losses.len(), steps + 1);
        assert!(trace.losses.last().unwrap() < trace.losses.first().unwrap());
        let scores = generalize(&induced, nonce, &bank).unwrap();
        assert!(scores[0] >= 0.9);
        assert_eq!(scores[0], trace.premise_probs[steps][0]);
        assert_eq!(scores, generalize(&induced, nonce, &bank).unwrap());
    }

    #[test]
    fn nonce_row_only_touches_only_that_row() {
        let (bank, params, nonce) = smoke(2);
        let params = with_row(&params, &bank);
        let cfg = InductionConfig {
            scope: Scope::NonceRowOnly,
            ..InductionConfig::default()
        };
        let (induced, _) = induce(&params, &bank, &[ConceptId(3)], nonce, &cfg).unwrap();
        for (i, (a, b)) in params.blocks().into_iter().zip(induced.blocks()).enumerate() {
            if i == 1 {
                for r in 0..a.rows() {
                    if r != nonce.0 {
                        assert_eq!(a.row(r), b.row(r));
                    }
                }
                assert_ne!(a.row(nonce.0), b.row(nonce.0));
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn embeddings_only_freezes_combiner() {
        let (bank, params, nonce) = smoke(3);
        let params = with_row(&params, &bank);
        let cfg = InductionConfig {
            scope: Scope::EmbeddingsOnly,
            ..InductionConfig::default()
        };
        let (induced, _) = induce(&params, &bank, &[ConceptId(2)], nonce, &cfg).unwrap();
        for i in 2..6 {
            assert_eq!(params.blocks()[i], induced.blocks()[i]);
        }
    }

    #[test]
    fn induce_errors() {
        let (bank, params, nonce) = smoke(4);
        let cfg = InductionConfig::default();
        // nonce row missing
        assert!(induce(&params, &bank, &[ConceptId(0)], nonce, &cfg).is_err());
        let params = with_row(&params, &bank);
        assert!(induce(&params, &bank, &[], nonce, &cfg).is_err());
        assert!(induce(&params, &bank, &[ConceptId(0)], PropertyId(0), &cfg).is_err());
        assert!(induce(&params, &bank, &[ConceptId(99)], nonce, &cfg).is_err());
    }

    #[test]
    fn not_reached_is_flagged() {
        let (bank, params, nonce) = smoke(5);
        let params = with_row(&params, &bank);
        let cfg = InductionConfig {
            max_steps: 1,
            lr: 1e-6,
            ..InductionConfig::default()
        };
        let (_, trace) = induce(&params, &bank, &[ConceptId(0)], nonce, &cfg).unwrap();
        assert_eq!(trace.steps_to_criterion, None);
        assert_eq!(trace.losses.len(), 2);
    }

    #[test]
    fn experiment_isolation_and_order() {
        let (bank, params, nonce) = smoke(6);
        let before = params.clone();
        let sets = vec![vec![ConceptId(1)], vec![ConceptId(4)], vec![ConceptId(1)]];
        let records = run_experiment(&params, &bank, nonce, &sets, &InductionConfig::default()).unwrap();
        assert_eq!(params, before);
        assert_eq!(records.len(), 3);
        assert_eq!(records[0], records[2]);
        assert_ne!(records[0].scores, records[1].scores);
        assert_eq!(records[1].premises, vec![ConceptId(4)]);
        assert!(records.iter().all(|r| r.scores.len() == bank.num_concepts()));
    }
}
