//! Property-induction laboratory.
//!
//! A small concept/property world (the belief bank) is learned by a
//! feed-forward belief classifier. A novel "nonce" property is then taught
//! on a few premise concepts by gradient descent, the weights are frozen and
//! the probability of the nonce property is read out for every concept.
//! The analysis modules compare those generalization profiles with the
//! structure of the bank and with the learned embedding geometry.
//!
//! Module map:
//!
//! - [`corpus`]: belief banks, taxonomies, the synthetic generator, file IO
//!   and the Jaccard similarity oracle.
//! - [`tensor`]: dense matrices and a reverse-mode tape.
//! - [`classifier`]: the (concept, property) -> probability network and its
//!   checkpoint format.
//! - [`pretrain`]: supervised training on the bank.
//! - [`induction`]: nonce-property injection and frozen read-out.
//! - [`phenomena`], [`emergent`], [`geometry`]: analysis batteries.
//! - [`stats`]: rank correlation and ROC AUC.

pub mod classifier;
pub mod corpus;
pub mod digest;
pub mod emergent;
mod error;
pub mod geometry;
pub mod induction;
pub mod phenomena;
pub mod pretrain;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
