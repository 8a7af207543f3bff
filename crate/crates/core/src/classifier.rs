//! Belief classifier: `sigmoid(w2 · relu(W1 · [e_concept ; q_property] + b1) + b2)`.
//!
//! Concept and property embeddings are rows of two lookup tables. The output
//! layer starts at exactly zero, so an untrained model scores every belief
//! 0.5. Scoring without a tape runs the same [`Tensor`] kernels as the
//! recorded forward pass and therefore returns bitwise identical values.

mod checkpoint;

use rand::Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint};

use crate::corpus::{BeliefBank, ConceptId, PropertyId, PropertyKind};
use crate::rng::seeded_rng;
use crate::tensor::{Tape, Tensor, VarId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            hidden_dim: 32,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 || self.hidden_dim < 2 {
            return Err(Error::Config(format!(
                "embed_dim {} and hidden_dim {} must both be at least 2",
                self.embed_dim, self.hidden_dim
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::Config(format!(
                "init_scale {} must be positive",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// How a freshly minted property gets its embedding row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowInit {
    Zero,
    SeededRandom(u64),
    /// Arithmetic mean of all Known property rows.
    MeanOfKnown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    concept_table: Tensor,
    property_table: Tensor,
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

/// Gradients for every parameter block, same shapes as the parameters.
#[derive(Clone, Debug)]
pub struct ParamGrads {
    pub concept_table: Tensor,
    pub property_table: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Which property rows an update may touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rows {
    All,
    Only(PropertyId),
    None,
}

/// Parameter blocks an update may touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateMask {
    pub concepts: bool,
    pub properties: Rows,
    pub combiner: bool,
}

impl UpdateMask {
    pub const ALL: UpdateMask = UpdateMask {
        concepts: true,
        properties: Rows::All,
        combiner: true,
    };
}

/// Loss, per-example probabilities and gradients of one batch.
#[derive(Clone, Debug)]
pub struct BatchStep {
    pub loss: f64,
    pub probabilities: Vec<f64>,
    pub grads: ParamGrads,
}

fn uniform_tensor(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
    Tensor::new(rows, cols, data).expect("finite uniform draws")
}

impl ModelParams {
    /// Seeded uniform `[-init_scale, init_scale]` embeddings and hidden layer,
    /// zero output layer.
    pub fn init(bank: &BeliefBank, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (d, h, s) = (config.embed_dim, config.hidden_dim, config.init_scale);
        let mut rng = seeded_rng(config.seed);
        let concept_table = uniform_tensor(&mut rng, bank.num_concepts(), d, s);
        let property_table = uniform_tensor(&mut rng, bank.num_properties(), d, s);
        let w1 = uniform_tensor(&mut rng, h, 2 * d, s);
        let b1 = uniform_tensor(&mut rng, 1, h, s);
        Ok(Self {
            config: config.clone(),
            concept_table,
            property_table,
            w1,
            b1,
            w2: Tensor::zeros(h, 1),
            b2: Tensor::zeros(1, 1),
        })
    }

    pub(crate) fn from_parts(config: ModelConfig, blocks: [Tensor; 6]) -> Result<Self> {
        let [concept_table, property_table, w1, b1, w2, b2] = blocks;
        let (d, h) = (config.embed_dim, config.hidden_dim);
        let ok = concept_table.cols() == d
            && property_table.cols() == d
            && w1.shape() == (h, 2 * d)
            && b1.shape() == (1, h)
            && w2.shape() == (h, 1)
            && b2.shape() == (1, 1);
        if !ok {
            return Err(Error::Validation("parameter block shapes disagree with config".into()));
        }
        Ok(Self {
            config,
            concept_table,
            property_table,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn concept_table(&self) -> &Tensor {
        &self.concept_table
    }

    pub fn property_table(&self) -> &Tensor {
        &self.property_table
    }

    pub fn num_concepts(&self) -> usize {
        self.concept_table.rows()
    }

    pub fn num_property_rows(&self) -> usize {
        self.property_table.rows()
    }

    /// Blocks in declaration order: concept table, property table, W1, b1, w2, b2.
    pub fn blocks(&self) -> [&Tensor; 6] {
        [
            &self.concept_table,
            &self.property_table,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    fn check_pair(&self, c: ConceptId, p: PropertyId) -> Result<()> {
        if c.0 >= self.concept_table.rows() {
            return Err(Error::OutOfRange {
                kind: "concept",
                id: c.0,
                count: self.concept_table.rows(),
            });
        }
        if p.0 >= self.property_table.rows() {
            return Err(Error::OutOfRange {
                kind: "property row",
                id: p.0,
                count: self.property_table.rows(),
            });
        }
        Ok(())
    }

    /// Forward pass without a tape.
    pub fn score_pairs(&self, pairs: &[(ConceptId, PropertyId)]) -> Result<Vec<f64>> {
        for &(c, p) in pairs {
            self.check_pair(c, p)?;
        }
        let (ci, pi) = split_pairs(pairs);
        let x = self
            .concept_table
            .select_rows(&ci)?
            .concat_rows(&self.property_table.select_rows(&pi)?)?;
        let hidden = x.matmul(&self.w1.transpose())?.add_bias(&self.b1)?.relu();
        let out = hidden.matmul(&self.w2)?.add_bias(&self.b2)?.sigmoid();
        Ok(out.into_vec())
    }

    pub fn score_belief(&self, concept: ConceptId, property: PropertyId) -> Result<f64> {
        Ok(self.score_pairs(&[(concept, property)])?[0])
    }

    /// Mean BCE over labelled pairs with gradients for every block.
    pub fn batch_step(&self, examples: &[(ConceptId, PropertyId, bool)]) -> Result<BatchStep> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let pairs: Vec<_> = examples.iter().map(|&(c, p, _)| (c, p)).collect();
        for &(c, p) in &pairs {
            self.check_pair(c, p)?;
        }
        let labels: Vec<bool> = examples.iter().map(|e| e.2).collect();
        let mut tape = Tape::new();
        let leaves: Vec<VarId> = self.blocks().iter().map(|t| tape.leaf((*t).clone())).collect();
        let probs = record_forward(&mut tape, &leaves, &pairs)?;
        let loss = tape.bce_loss(probs, &labels)?;
        let loss_value = tape.value(loss).get(0, 0);
        let probabilities = tape.value(probs).as_slice().to_vec();
        let mut g = tape.backward(loss)?;
        let mut take = |i: usize| g.take(leaves[i]).expect("leaf gradient");
        let grads = ParamGrads {
            concept_table: take(0),
            property_table: take(1),
            w1: take(2),
            b1: take(3),
            w2: take(4),
            b2: take(5),
        };
        Ok(BatchStep {
            loss: loss_value,
            probabilities,
            grads,
        })
    }

    /// `param -= lr * grad` on the blocks and rows allowed by `mask`.
    pub fn apply_gradients(&mut self, grads: &ParamGrads, lr: f64, mask: UpdateMask) {
        fn sub(target: &mut [f64], g: &[f64], lr: f64) {
            for (t, g) in target.iter_mut().zip(g) {
                *t -= lr * *g;
            }
        }
        if mask.concepts {
            sub(self.concept_table.as_mut_slice(), grads.concept_table.as_slice(), lr);
        }
        match mask.properties {
            Rows::All => sub(self.property_table.as_mut_slice(), grads.property_table.as_slice(), lr),
            Rows::Only(p) => sub(self.property_table.row_mut(p.0), grads.property_table.row(p.0), lr),
            Rows::None => {}
        }
        if mask.combiner {
            sub(self.w1.as_mut_slice(), grads.w1.as_slice(), lr);
            sub(self.b1.as_mut_slice(), grads.b1.as_slice(), lr);
            sub(self.w2.as_mut_slice(), grads.w2.as_slice(), lr);
            sub(self.b2.as_mut_slice(), grads.b2.as_slice(), lr);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|t| t.is_finite())
    }

    /// Appends the embedding row for the next minted nonce property of `bank`
    /// and returns its index.
    pub fn add_property_row(&mut self, bank: &BeliefBank, init: RowInit) -> Result<PropertyId> {
        let row = PropertyId(self.property_table.rows());
        if row.0 >= bank.num_properties() {
            return Err(Error::InvalidArgument(format!(
                "property table already has {} rows for a bank of {} properties",
                row.0,
                bank.num_properties()
            )));
        }
        if bank.property(row)?.kind != PropertyKind::Nonce {
            return Err(Error::InvalidArgument(format!(
                "property {} is not a nonce property",
                bank.property(row)?.name
            )));
        }
        let d = self.config.embed_dim;
        let values = match init {
            RowInit::Zero => vec![0.0; d],
            RowInit::SeededRandom(seed) => {
                let mut rng = seeded_rng(seed);
                let s = self.config.init_scale;
                (0..d).map(|_| rng.gen_range(-s..=s)).collect()
            }
            RowInit::MeanOfKnown => {
                let mut acc = vec![0.0; d];
                let mut n = 0usize;
                for r in 0..self.property_table.rows() {
                    if bank.is_known(PropertyId(r)) {
                        for (a, v) in acc.iter_mut().zip(self.property_table.row(r)) {
                            *a += *v;
                        }
                        n += 1;
                    }
                }
                if n == 0 {
                    return Err(Error::InvalidArgument("no Known property rows to average".into()));
                }
                acc.iter().map(|a| a / n as f64).collect()
            }
        };
        self.property_table.push_row(&values)?;
        Ok(row)
    }
}

fn split_pairs(pairs: &[(ConceptId, PropertyId)]) -> (Vec<usize>, Vec<usize>) {
    pairs.iter().map(|&(c, p)| (c.0, p.0)).unzip()
}

/// Records the classifier forward pass for `pairs`; `leaves` are the six
/// parameter blocks in declaration order. Returns the `B × 1` probability node.
pub fn record_forward(tape: &mut Tape, leaves: &[VarId], pairs: &[(ConceptId, PropertyId)]) -> Result<VarId> {
    let [concepts, properties, w1, b1, w2, b2] = leaves else {
        return Err(Error::InvalidArgument(format!(
            "expected 6 parameter leaves, got {}",
            leaves.len()
        )));
    };
    let (ci, pi) = split_pairs(pairs);
    let e = tape.select_rows(*concepts, &ci)?;
    let q = tape.select_rows(*properties, &pi)?;
    let x = tape.concat_rows(e, q)?;
    let w1t = tape.transpose(*w1)?;
    let pre = tape.matmul(x, w1t)?;
    let pre = tape.add_bias(pre, *b1)?;
    let hidden = tape.relu(pre)?;
    let logit = tape.matmul(hidden, *w2)?;
    let logit = tape.add_bias(logit, *b2)?;
    tape.sigmoid(logit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_taxonomic_bank, TaxonomySpec};

    fn setup() -> (BeliefBank, ModelParams) {
        let (bank, _) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let params = ModelParams::init(
            &bank,
            &ModelConfig {
                seed: 3,
                ..ModelConfig::default()
            },
        )
        .unwrap();
        (bank, params)
    }

    #[test]
    fn untrained_scores_are_one_half() {
        let (bank, params) = setup();
        for b in bank.beliefs() {
            assert_eq!(params.score_belief(b.concept, b.property).unwrap(), 0.5);
        }
        let examples: Vec<_> = bank
            .beliefs()
            .iter()
            .map(|b| (b.concept, b.property, b.label))
            .collect();
        let step = params.batch_step(&examples).unwrap();
        assert!((step.loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn init_is_seeded() {
        let (bank, a) = setup();
        let b = ModelParams::init(
            &bank,
            &ModelConfig {
                seed: 3,
                ..ModelConfig::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        for s in 0..10u64 {
            let x = ModelParams::init(
                &bank,
                &ModelConfig {
                    seed: 2 * s,
                    ..ModelConfig::default()
                },
            )
            .unwrap();
            let y = ModelParams::init(
                &bank,
                &ModelConfig {
                    seed: 2 * s + 1,
                    ..ModelConfig::default()
                },
            )
            .unwrap();
            assert_ne!(x, y);
        }
        let s = a.config().init_scale;
        assert!(a.concept_table().as_slice().iter().all(|v| v.abs() <= s));
    }

    #[test]
    fn config_validation() {
        let bad = ModelConfig {
            embed_dim: 1,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            init_scale: 0.0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn out_of_range_ids() {
        let (_, params) = setup();
        assert!(params.score_belief(ConceptId(99), PropertyId(0)).is_err());
        assert!(params.score_belief(ConceptId(0), PropertyId(999)).is_err());
    }

    #[test]
    fn overfit_single_true_belief() {
        let (_, mut params) = setup();
        let ex = [(ConceptId(0), PropertyId(0), true)];
        for _ in 0..500 {
            let step = params.batch_step(&ex).unwrap();
            params.apply_gradients(&step.grads, 0.1, UpdateMask::ALL);
        }
        let p = params.score_belief(ConceptId(0), PropertyId(0)).unwrap();
        assert!(p > 0.99, "{p}");
        assert_eq!(p, params.score_belief(ConceptId(0), PropertyId(0)).unwrap());
    }

    #[test]
    fn tape_and_tapeless_forward_agree_bitwise() {
        let (bank, mut params) = setup();
        let ex: Vec<_> = bank
            .beliefs()
            .iter()
            .take(20)
            .map(|b| (b.concept, b.property, b.label))
            .collect();
        for _ in 0..5 {
            let step = params.batch_step(&ex).unwrap();
            params.apply_gradients(&step.grads, 0.5, UpdateMask::ALL);
        }
        let step = params.batch_step(&ex).unwrap();
        let pairs: Vec<_> = ex.iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(step.probabilities, params.score_pairs(&pairs).unwrap());
        for (i, &(c, p)) in pairs.iter().enumerate() {
            assert_eq!(
                params.score_belief(c, p).unwrap().to_bits(),
                step.probabilities[i].to_bits()
            );
        }
    }

    #[test]
    fn add_row_strategies() {
        let (bank, params) = setup();
        let (minted, nonce) = bank.mint_nonce("queem").unwrap();

        let mut zero = params.clone();
        assert_eq!(zero.add_property_row(&minted, RowInit::Zero).unwrap(), nonce);
        assert!(zero.property_table().row(nonce.0).iter().all(|&v| v == 0.0));

        let mut mean = params.clone();
        mean.add_property_row(&minted, RowInit::MeanOfKnown).unwrap();
        let n = bank.num_properties() as f64;
        for k in 0..params.config().embed_dim {
            let expect: f64 = (0..bank.num_properties())
                .map(|r| params.property_table().get(r, k))
                .sum::<f64>()
                / n;
            assert!((mean.property_table().get(nonce.0, k) - expect).abs() < 1e-12);
        }

        let mut rnd = params.clone();
        rnd.add_property_row(&minted, RowInit::SeededRandom(9)).unwrap();
        let mut rnd2 = params.clone();
        rnd2.add_property_row(&minted, RowInit::SeededRandom(9)).unwrap();
        assert_eq!(rnd, rnd2);

        // known-property scores untouched
        for b in bank.beliefs() {
            assert_eq!(
                params.score_belief(b.concept, b.property).unwrap(),
                mean.score_belief(b.concept, b.property).unwrap()
            );
        }
        // second row has no minted property behind it
        assert!(mean.add_property_row(&minted, RowInit::Zero).is_err());
        // cannot add a row for a bank without nonce properties
        let mut plain = params.clone();
        assert!(plain.add_property_row(&bank, RowInit::Zero).is_err());
    }

    #[test]
    fn score_depends_only_on_its_rows() {
        let (_, params) = setup();
        let mut trained = params.clone();
        let ex = [
            (ConceptId(1), PropertyId(2), true),
            (ConceptId(3), PropertyId(4), false),
        ];
        for _ in 0..10 {
            let s = trained.batch_step(&ex).unwrap();
            trained.apply_gradients(&s.grads, 0.5, UpdateMask::ALL);
        }
        let base = trained.score_belief(ConceptId(1), PropertyId(2)).unwrap();
        let mut perturbed = trained.clone();
        perturbed.concept_table.row_mut(0)[0] += 3.0;
        perturbed.property_table.row_mut(5)[1] -= 2.0;
        assert_eq!(
            base.to_bits(),
            perturbed.score_belief(ConceptId(1), PropertyId(2)).unwrap().to_bits()
        );
    }

    #[test]
    fn unused_concept_rows_get_zero_gradient() {
        let (_, params) = setup();
        let ex = [(ConceptId(1), PropertyId(2), true)];
        let mut trained = params.clone();
        let s = trained.batch_step(&ex).unwrap();
        trained.apply_gradients(&s.grads, 0.5, UpdateMask::ALL);
        let s = trained.batch_step(&ex).unwrap();
        for r in 0..trained.num_concepts() {
            if r != 1 {
                assert!(s.grads.concept_table.row(r).iter().all(|&g| g == 0.0));
            }
        }
        assert!(s.grads.concept_table.row(1).iter().any(|&g| g != 0.0));
    }
}
