//! Configurations of the published studies, embedded in the binary.

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const PRESETS: [(&str, &str); 7] = [
    ("fig_c1a", include_str!("../presets/fig_c1a.toml")),
    ("fig_c1b", include_str!("../presets/fig_c1b.toml")),
    ("fig_c2", include_str!("../presets/fig_c2.toml")),
    ("fig_e2_e3", include_str!("../presets/fig_e2_e3.toml")),
    ("fig_e6", include_str!("../presets/fig_e6.toml")),
    ("fig_e7", include_str!("../presets/fig_e7.toml")),
    ("fig_e8", include_str!("../presets/fig_e8.toml")),
];

/// TOML text of a preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parsed and validated preset.
pub fn preset(name: &str) -> Option<Result<ExperimentConfig>> {
    preset_text(name).map(|t| {
        let cfg = ExperimentConfig::from_toml_str(t)?;
        cfg.check()?;
        Ok(cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
