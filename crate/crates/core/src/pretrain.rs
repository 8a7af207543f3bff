//! Supervised training of the classifier on a belief bank.
//!
//! Plain gradient descent on mean binary cross-entropy, full batch or seeded
//! shuffled mini-batches. Training stops as soon as training accuracy reaches
//! the target.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::classifier::{ModelParams, UpdateMask};
use crate::corpus::{Belief, BeliefBank};
use crate::rng::seeded_rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Batch {
    Full,
    Size(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: Batch,
    pub target_acc: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            epochs: 2000,
            batch: Batch::Full,
            target_acc: 0.99,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is accepted as a no-op run
        if !(self.lr.is_finite() && (0.0..=10.0).contains(&self.lr)) {
            return Err(Error::Config(format!("learning rate {} outside [0, 10]", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if matches!(self.batch, Batch::Size(0)) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.target_acc > 0.5 && self.target_acc <= 1.0) {
            return Err(Error::Config(format!(
                "target_acc {} outside (0.5, 1]",
                self.target_acc
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    /// Mean loss of each epoch, measured before that epoch's updates.
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
    pub epochs_run: usize,
}

impl TrainLog {
    /// `epoch,loss` rows, epochs numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            let _ = writeln!(out, "{},{l}", i + 1);
        }
        out
    }
}

/// Fraction of beliefs with `(score > 0.5) == label`.
pub fn evaluate_accuracy(params: &ModelParams, beliefs: &[Belief]) -> Result<f64> {
    if beliefs.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty belief list".into()));
    }
    let pairs: Vec<_> = beliefs.iter().map(|b| (b.concept, b.property)).collect();
    let scores = params.score_pairs(&pairs)?;
    let correct = scores
        .iter()
        .zip(beliefs)
        .filter(|(&s, b)| (s > 0.5) == b.label)
        .count();
    Ok(correct as f64 / beliefs.len() as f64)
}

/// Trains a copy of `params` on every belief of `bank`.
pub fn pretrain(params: &ModelParams, bank: &BeliefBank, cfg: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    if !bank.beliefs().iter().any(|b| b.label) || !bank.beliefs().iter().any(|b| !b.label) {
        return Err(Error::Validation(
            "pretraining needs at least one true and one false belief".into(),
        ));
    }
    if bank.beliefs().iter().any(|b| !bank.is_known(b.property)) {
        return Err(Error::Validation(
            "pretraining beliefs must use Known properties".into(),
        ));
    }
    train_on_beliefs(params, bank.beliefs(), cfg)
}

/// The training loop behind [`pretrain`], over an arbitrary non-empty belief list.
pub fn train_on_beliefs(
    params: &ModelParams,
    beliefs: &[Belief],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    if beliefs.is_empty() {
        return Err(Error::InvalidArgument("no beliefs to train on".into()));
    }
    let mut params = params.clone();
    let mut rng = seeded_rng(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..beliefs.len()).collect();
    let chunk = match cfg.batch {
        Batch::Full => beliefs.len(),
        Batch::Size(n) => n,
    };

    let mut epoch_losses = Vec::new();
    let mut accuracy = evaluate_accuracy(&params, beliefs)?;
    for epoch in 1..=cfg.epochs {
        if chunk < beliefs.len() {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for idx in order.chunks(chunk) {
            let examples: Vec<_> = idx
                .iter()
                .map(|&i| (beliefs[i].concept, beliefs[i].property, beliefs[i].label))
                .collect();
            let step = params.batch_step(&examples).map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence {
                    stage: "pretrain epoch",
                    at: epoch,
                },
                other => other,
            })?;
            if !step.loss.is_finite() {
                return Err(Error::Divergence {
                    stage: "pretrain epoch",
                    at: epoch,
                });
            }
            total += step.loss * examples.len() as f64;
            params.apply_gradients(&step.grads, cfg.lr, UpdateMask::ALL);
        }
        if !params.is_finite() {
            return Err(Error::Divergence {
                stage: "pretrain epoch",
                at: epoch,
            });
        }
        epoch_losses.push(total / beliefs.len() as f64);
        accuracy = evaluate_accuracy(&params, beliefs)?;
        if accuracy >= cfg.target_acc {
            break;
        }
    }
    let epochs_run = epoch_losses.len();
    Ok((
        params,
        TrainLog {
            epoch_losses,
            final_accuracy: accuracy,
            epochs_run,
        },
    ))
}
