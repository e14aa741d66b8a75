//! Experiment configuration, file formats, the Monte-Carlo runner and
//! reports built on `shmotion-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod erank;
mod error;
pub mod experiment;
pub mod formats;
pub mod presets;
pub mod report;

pub use error::{Error, Issue, Result};

use std::path::Path;

/// Loads a configuration file, or a preset given as `preset:NAME`.
pub fn load_config(spec: &str) -> Result<config::ExperimentConfig> {
    match spec.strip_prefix("preset:") {
        Some(name) => presets::preset(name).unwrap_or_else(|| {
            Err(Error::Validation(vec![Issue::new(
                "config",
                format!(
                    "unknown preset {name:?}; available: {}",
                    presets::PRESETS.map(|p| p.0).join(", ")
                ),
            )]))
        }),
        None => config::ExperimentConfig::load(Path::new(spec)),
    }
}
