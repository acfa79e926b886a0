//! Experiment harness for `rrl-core`: configuration files, multi-instance
//! training runs, perturbation sweeps, run manifests and SVG plots.

pub mod agent;
pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod plot;
pub mod policy_view;
pub mod runtime;

pub use error::{ConfigError, HarnessError, Result};
