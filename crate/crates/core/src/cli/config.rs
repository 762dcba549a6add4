//! TOML run configuration. Each subcommand reads its own table; command-line
//! flags win over file values.
//!
//! ```toml
//! [plan]
//! mode = "weight"
//! n_cap = 2500
//! rho = 0.25
//! tau = 5.0
//!
//! [sample]
//! seed = 7
//! length = 100000
//! drawer = "alias"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub materialize: SeedSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub scale: ScaleSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub mode: Option<String>,
    pub n_cap: Option<u64>,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub seed: Option<u64>,
    pub length: Option<u64>,
    pub drawer: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub threshold: Option<f64>,
    pub cde_from_macro: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSection {
    pub axis: Option<String>,
    pub n_units: Option<u32>,
    pub usage: Option<f64>,
    pub rho: Option<f64>,
    pub per_source_real: Option<u64>,
    pub per_generator_fake: Option<u64>,
    pub trial_seed: Option<u64>,
    pub trials: Option<u32>,
    pub strict: Option<bool>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg =
            RunConfig::parse("[plan]\nmode = \"weight\"\nn_cap = 2500\n\n[sample]\nseed = 3\n")
                .unwrap();
        assert_eq!(cfg.plan.mode.as_deref(), Some("weight"));
        assert_eq!(cfg.plan.n_cap, Some(2500));
        assert_eq!(cfg.sample.seed, Some(3));
        assert_eq!(cfg.eval, EvalSection::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::parse("[plan]\nncap = 1\n").is_err());
        assert!(RunConfig::parse("[planning]\n").is_err());
    }
}
