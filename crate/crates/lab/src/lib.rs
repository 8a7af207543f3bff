//! Experiment pipeline around `induction_core`: configuration files, the
//! output-directory manifest and the stage commands used by the
//! `induction-lab` binary.

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;

pub use config::{ExperimentConfig, NonceInit, PremiseSpec};
pub use error::{LabError, LabResult};
pub use manifest::Manifest;
