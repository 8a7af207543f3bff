//! Experiment configuration: a flat `key = value` file with `#` comments.
//!
//! Unknown keys, repeated keys and malformed values are errors that name the
//! line. Every key has a default, so an empty file is the smoke
//! configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use induction_core::classifier::{ModelConfig, RowInit};
use induction_core::corpus::TaxonomySpec;
use induction_core::digest::sha256_hex;
use induction_core::induction::{InductionConfig, Scope};
use induction_core::pretrain::{Batch, TrainConfig};
use induction_core::rng::{derive_seed, stage};
use induction_core::{Error, Result};

/// How the nonce row is initialised. `Random` draws from a seed derived from
/// the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonceInit {
    Zero,
    MeanOfKnown,
    Random,
}

impl FromStr for NonceInit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(NonceInit::Zero),
            "mean-of-known" => Ok(NonceInit::MeanOfKnown),
            "random" => Ok(NonceInit::Random),
            _ => Err("expected zero, mean-of-known or random".into()),
        }
    }
}

impl Display for NonceInit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NonceInit::Zero => "zero",
            NonceInit::MeanOfKnown => "mean-of-known",
            NonceInit::Random => "random",
        })
    }
}

/// Premise sets for `induce`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PremiseSpec {
    /// One singleton set per concept.
    AllSingletons,
    /// `;`-separated sets of `+`-joined concept names.
    Sets(Vec<Vec<String>>),
}

impl FromStr for PremiseSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all-singletons" {
            return Ok(PremiseSpec::AllSingletons);
        }
        let sets: Vec<Vec<String>> = s
            .split(';')
            .map(|set| set.split('+').map(|c| c.trim().to_string()).collect())
            .collect();
        if sets.iter().flatten().any(|c| c.is_empty()) {
            return Err("expected all-singletons or sets like robin+canary;penguin".into());
        }
        Ok(PremiseSpec::Sets(sets))
    }
}

impl Display for PremiseSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PremiseSpec::AllSingletons => f.write_str("all-singletons"),
            PremiseSpec::Sets(sets) => {
                let parts: Vec<String> = sets.iter().map(|s| s.join("+")).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,

    pub branching: usize,
    pub depth: usize,
    pub props_per_node: usize,
    pub cross_cutting_props: usize,
    pub cross_cutting_coverage: f64,
    pub negative_ratio: f64,

    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,

    pub train_lr: f64,
    pub epochs: usize,
    pub batch: Batch,
    pub target_acc: f64,

    pub induce_lr: f64,
    pub max_steps: usize,
    pub tau: f64,
    pub scope: Scope,
    pub nonce_init: NonceInit,
    pub nonce: String,
    pub premises: PremiseSpec,

    pub similarity: bool,
    pub typicality: bool,
    pub diversity: bool,
    pub monotonicity: bool,
    pub emergent: bool,
    pub geometry: bool,
    pub category: String,
    pub diversity_pairs: usize,
    pub monotonicity_chains: usize,
    pub emergent_min_holders: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tax = TaxonomySpec::default();
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let ind = InductionConfig::default();
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            branching: tax.branching,
            depth: tax.depth,
            props_per_node: tax.props_per_node,
            cross_cutting_props: tax.cross_cutting_props,
            cross_cutting_coverage: tax.cross_cutting_coverage,
            negative_ratio: tax.negative_ratio,
            embed_dim: model.embed_dim,
            hidden_dim: model.hidden_dim,
            init_scale: model.init_scale,
            train_lr: train.lr,
            epochs: train.epochs,
            batch: train.batch,
            target_acc: train.target_acc,
            induce_lr: ind.lr,
            max_steps: ind.max_steps,
            tau: ind.tau,
            scope: ind.scope,
            nonce_init: NonceInit::MeanOfKnown,
            nonce: "queem".into(),
            premises: PremiseSpec::AllSingletons,
            similarity: true,
            typicality: true,
            diversity: true,
            monotonicity: true,
            emergent: true,
            geometry: true,
            category: "root".into(),
            diversity_pairs: 36,
            monotonicity_chains: 30,
            emergent_min_holders: 2,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| Error::Parse {
        line,
        msg: format!("bad value {value:?} for {key}: {e}"),
    })
}

fn parse_batch(s: &str) -> std::result::Result<Batch, String> {
    if s == "full" {
        return Ok(Batch::Full);
    }
    s.parse()
        .map(Batch::Size)
        .map_err(|_| "expected full or a batch size".to_string())
}

fn batch_text(b: Batch) -> String {
    match b {
        Batch::Full => "full".into(),
        Batch::Size(n) => n.to_string(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(Error::Parse {
                    line,
                    msg: format!("{key} already set on line {first}"),
                });
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(line, key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "branching" => self.branching = parse_value(line, key, v)?,
            "depth" => self.depth = parse_value(line, key, v)?,
            "props_per_node" => self.props_per_node = parse_value(line, key, v)?,
            "cross_cutting_props" => self.cross_cutting_props = parse_value(line, key, v)?,
            "cross_cutting_coverage" => self.cross_cutting_coverage = parse_value(line, key, v)?,
            "negative_ratio" => self.negative_ratio = parse_value(line, key, v)?,
            "embed_dim" => self.embed_dim = parse_value(line, key, v)?,
            "hidden_dim" => self.hidden_dim = parse_value(line, key, v)?,
            "init_scale" => self.init_scale = parse_value(line, key, v)?,
            "train_lr" => self.train_lr = parse_value(line, key, v)?,
            "epochs" => self.epochs = parse_value(line, key, v)?,
            "batch" => {
                self.batch = parse_batch(v).map_err(|msg| Error::Parse {
                    line,
                    msg: format!("batch: {msg}"),
                })?
            }
            "target_acc" => self.target_acc = parse_value(line, key, v)?,
            "induce_lr" => self.induce_lr = parse_value(line, key, v)?,
            "max_steps" => self.max_steps = parse_value(line, key, v)?,
            "tau" => self.tau = parse_value(line, key, v)?,
            "scope" => self.scope = parse_value(line, key, v)?,
            "nonce_init" => self.nonce_init = parse_value(line, key, v)?,
            "nonce" => self.nonce = v.to_string(),
            "premises" => self.premises = parse_value(line, key, v)?,
            "similarity" => self.similarity = parse_value(line, key, v)?,
            "typicality" => self.typicality = parse_value(line, key, v)?,
            "diversity" => self.diversity = parse_value(line, key, v)?,
            "monotonicity" => self.monotonicity = parse_value(line, key, v)?,
            "emergent" => self.emergent = parse_value(line, key, v)?,
            "geometry" => self.geometry = parse_value(line, key, v)?,
            "category" => self.category = v.to_string(),
            "diversity_pairs" => self.diversity_pairs = parse_value(line, key, v)?,
            "monotonicity_chains" => self.monotonicity_chains = parse_value(line, key, v)?,
            "emergent_min_holders" => self.emergent_min_holders = parse_value(line, key, v)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.taxonomy_spec().validate()?;
        self.model_config().validate()?;
        self.train_config().validate()?;
        self.induction_config().validate()?;
        if self.nonce.is_empty() || self.nonce.contains(|c: char| c.is_whitespace() || c == '+' || c == ',') {
            return Err(Error::Config(format!(
                "nonce name {:?} is not a plain token",
                self.nonce
            )));
        }
        if self.diversity_pairs < 2 || self.monotonicity_chains == 0 {
            return Err(Error::Config(
                "diversity_pairs must be >= 2 and monotonicity_chains >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn taxonomy_spec(&self) -> TaxonomySpec {
        TaxonomySpec {
            branching: self.branching,
            depth: self.depth,
            props_per_node: self.props_per_node,
            cross_cutting_props: self.cross_cutting_props,
            cross_cutting_coverage: self.cross_cutting_coverage,
            negative_ratio: self.negative_ratio,
            seed: derive_seed(self.seed, stage::TAXONOMY),
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            init_scale: self.init_scale,
            seed: derive_seed(self.seed, stage::MODEL_INIT),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train_lr,
            epochs: self.epochs,
            batch: self.batch,
            target_acc: self.target_acc,
            shuffle_seed: derive_seed(self.seed, stage::SHUFFLE),
        }
    }

    pub fn induction_config(&self) -> InductionConfig {
        InductionConfig {
            lr: self.induce_lr,
            max_steps: self.max_steps,
            tau: self.tau,
            scope: self.scope,
            init: match self.nonce_init {
                NonceInit::Zero => RowInit::Zero,
                NonceInit::MeanOfKnown => RowInit::MeanOfKnown,
                NonceInit::Random => RowInit::SeededRandom(derive_seed(self.seed, stage::NONCE_INIT)),
            },
        }
    }

    /// Every key with its effective value, as written in a config file.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &'static str, v: String| {
            m.insert(k, v);
        };
        put("seed", self.seed.to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("branching", self.branching.to_string());
        put("depth", self.depth.to_string());
        put("props_per_node", self.props_per_node.to_string());
        put("cross_cutting_props", self.cross_cutting_props.to_string());
        put("cross_cutting_coverage", self.cross_cutting_coverage.to_string());
        put("negative_ratio", self.negative_ratio.to_string());
        put("embed_dim", self.embed_dim.to_string());
        put("hidden_dim", self.hidden_dim.to_string());
        put("init_scale", self.init_scale.to_string());
        put("train_lr", self.train_lr.to_string());
        put("epochs", self.epochs.to_string());
        put("batch", batch_text(self.batch));
        put("target_acc", self.target_acc.to_string());
        put("induce_lr", self.induce_lr.to_string());
        put("max_steps", self.max_steps.to_string());
        put("tau", self.tau.to_string());
        put("scope", self.scope.to_string());
        put("nonce_init", self.nonce_init.to_string());
        put("nonce", self.nonce.clone());
        put("premises", self.premises.to_string());
        put("similarity", self.similarity.to_string());
        put("typicality", self.typicality.to_string());
        put("diversity", self.diversity.to_string());
        put("monotonicity", self.monotonicity.to_string());
        put("emergent", self.emergent.to_string());
        put("geometry", self.geometry.to_string());
        put("category", self.category.clone());
        put("diversity_pairs", self.diversity_pairs.to_string());
        put("monotonicity_chains", self.monotonicity_chains.to_string());
        put("emergent_min_holders", self.emergent_min_holders.to_string());
        m
    }

    fn stage_digest(&self, upstream: Option<&str>, keys: &[&str]) -> String {
        let echo = self.echo();
        let mut text = String::new();
        if let Some(up) = upstream {
            text.push_str(&format!("upstream={up}\n"));
        }
        for k in keys {
            text.push_str(&format!("{k}={}\n", echo[k]));
        }
        sha256_hex(text.as_bytes())
    }

    /// Digest of the knobs that shape each stage's outputs, chained through
    /// the stages before it.
    pub fn generate_digest(&self) -> String {
        self.stage_digest(
            None,
            &[
                "seed",
                "branching",
                "depth",
                "props_per_node",
                "cross_cutting_props",
                "cross_cutting_coverage",
                "negative_ratio",
            ],
        )
    }

    pub fn pretrain_digest(&self) -> String {
        self.stage_digest(
            Some(&self.generate_digest()),
            &[
                "embed_dim",
                "hidden_dim",
                "init_scale",
                "train_lr",
                "epochs",
                "batch",
                "target_acc",
            ],
        )
    }

    pub fn induce_digest(&self) -> String {
        self.stage_digest(
            Some(&self.pretrain_digest()),
            &[
                "induce_lr",
                "max_steps",
                "tau",
                "scope",
                "nonce_init",
                "nonce",
                "premises",
            ],
        )
    }

    pub fn battery_digest(&self) -> String {
        self.stage_digest(
            Some(&self.induce_digest()),
            &[
                "similarity",
                "typicality",
                "diversity",
                "monotonicity",
                "emergent",
                "geometry",
                "category",
                "diversity_pairs",
                "monotonicity_chains",
                "emergent_min_holders",
            ],
        )
    }
}
