//! Plain-text run configuration for the command-line tools.
//!
//! The format is TOML with a flat environment block; variant-specific fields
//! are validated here rather than through serde enum tagging so that error
//! messages can point at the offending key.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::counterexample::EstimatorBudget;
use crate::diagnostics::{CampaignBudget, ClassifyThresholds, EventThresholds};
use crate::env::{DefectLaw, EnvError, EnvVariant, EnvironmentSpec, PeriodicPattern};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config error: {0}")]
    Invalid(String),
    #[error("config error: {0}")]
    Environment(#[from] EnvError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Flat environment block; which fields are required depends on `variant`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvBlock {
    pub variant: String,
    /// Environment seed; defaults to the master seed.
    pub seed: Option<u64>,
    /// Periodic orientation pattern; defaults to the alternating one.
    pub pattern: Option<Vec<i8>>,
    pub beta: Option<f64>,
    pub c: Option<f64>,
    pub inner_radius: Option<i64>,
    pub defect_levels: Option<Vec<i64>>,
    /// Pairs (level, orientation) forcing defect orientations.
    pub orientation_overrides: Option<Vec<(i64, i8)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetBlock {
    pub steps: Option<u64>,
    pub replicas: Option<u32>,
    pub checkpoints: Option<Vec<u64>>,
}

impl Default for BudgetBlock {
    fn default() -> Self {
        Self {
            steps: None,
            replicas: None,
            checkpoints: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdBlock {
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub delta3: Option<f64>,
    /// Strip width Q for crossing statistics.
    pub q: Option<i64>,
    /// Near-strip radius L (in units of Q).
    pub strip_l: Option<i64>,
    pub recurrent_growth: Option<f64>,
    pub transient_growth: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleBlock {
    pub targets: Option<Vec<f64>>,
    pub replicas: Option<u32>,
    pub initial_steps: Option<u64>,
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of all randomness; required so every artifact is reproducible.
    pub master_seed: u64,
    pub environment: EnvBlock,
    #[serde(default)]
    pub budget: BudgetBlock,
    #[serde(default)]
    pub thresholds: ThresholdBlock,
    #[serde(default)]
    pub counterexample: CounterexampleBlock,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.environment_spec()?;
        if config.budget.replicas == Some(0) {
            return Err(invalid("budget.replicas must be at least 1"));
        }
        if config.budget.steps == Some(0) {
            return Err(invalid("budget.steps must be at least 1"));
        }
        Ok(config)
    }

    /// SHA-256 of the configuration text, stamped into every output file.
    pub fn hash_of(text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn environment_spec(&self) -> Result<EnvironmentSpec, ConfigError> {
        let e = &self.environment;
        let seed = e.seed.unwrap_or(self.master_seed);
        let pattern = match &e.pattern {
            Some(values) => PeriodicPattern::new(values.clone())?,
            None => PeriodicPattern::alternating(),
        };
        let variant = match e.variant.as_str() {
            "alternating" => EnvVariant::Alternating,
            "half_plane" => EnvVariant::HalfPlane,
            "iid_uniform" => EnvVariant::IidUniform,
            "periodic_with_defects" => {
                let beta = e
                    .beta
                    .ok_or_else(|| invalid("environment.beta is required for periodic_with_defects"))?;
                EnvVariant::PeriodicWithDefects {
                    pattern,
                    law: DefectLaw::new(beta, e.c.unwrap_or(1.0), e.inner_radius.unwrap_or(1))?,
                }
            }
            "explicit_defects" => {
                let levels = e.defect_levels.as_ref().ok_or_else(|| {
                    invalid("environment.defect_levels is required for explicit_defects")
                })?;
                let overrides = e.orientation_overrides.clone().unwrap_or_default();
                if overrides.iter().any(|&(_, o)| o != 1 && o != -1) {
                    return Err(invalid("orientation_overrides values must be +1 or -1"));
                }
                EnvVariant::ExplicitDefects {
                    pattern,
                    defect_levels: levels.iter().copied().collect(),
                    orientation_overrides: overrides.into_iter().collect(),
                }
            }
            other => {
                return Err(invalid(format!(
                    "unknown environment.variant {other:?}; expected one of \
                     alternating, half_plane, iid_uniform, periodic_with_defects, explicit_defects"
                )))
            }
        };
        Ok(EnvironmentSpec::new(variant, seed))
    }

    pub fn campaign_budget(&self) -> Result<CampaignBudget, ConfigError> {
        let steps = self.budget.steps.unwrap_or(100_000);
        let replicas = self.budget.replicas.unwrap_or(16);
        let budget = match &self.budget.checkpoints {
            Some(grid) => {
                if grid.is_empty()
                    || grid.windows(2).any(|w| w[0] >= w[1])
                    || *grid.last().unwrap() != steps
                {
                    return Err(invalid(
                        "budget.checkpoints must be strictly increasing and end at budget.steps",
                    ));
                }
                CampaignBudget {
                    steps,
                    replicas,
                    checkpoints: grid.clone(),
                }
            }
            None => CampaignBudget::new(steps, replicas),
        };
        Ok(budget)
    }

    pub fn event_thresholds(&self) -> EventThresholds {
        let d = EventThresholds::default();
        EventThresholds {
            delta1: self.thresholds.delta1.unwrap_or(d.delta1),
            delta2: self.thresholds.delta2.unwrap_or(d.delta2),
            delta3: self.thresholds.delta3.unwrap_or(d.delta3),
        }
    }

    pub fn classify_thresholds(&self) -> ClassifyThresholds {
        let d = ClassifyThresholds::default();
        ClassifyThresholds {
            recurrent_growth: self.thresholds.recurrent_growth.unwrap_or(d.recurrent_growth),
            transient_growth: self.thresholds.transient_growth.unwrap_or(d.transient_growth),
        }
    }

    pub fn counterexample_targets(&self) -> Vec<f64> {
        self.counterexample
            .targets
            .clone()
            .unwrap_or_else(|| vec![1.0, 2.0, 3.0])
    }

    pub fn estimator_budget(&self) -> EstimatorBudget {
        let d = EstimatorBudget::default();
        EstimatorBudget {
            replicas: self.counterexample.replicas.unwrap_or(d.replicas),
            initial_steps: self.counterexample.initial_steps.unwrap_or(d.initial_steps),
            max_steps: self.counterexample.max_steps.unwrap_or(d.max_steps),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "master_seed = 42\n[environment]\nvariant = \"alternating\"\n";

    #[test]
    fn minimal_config_parses() {
        let config = RunConfig::parse(MINIMAL).unwrap();
        let spec = config.environment_spec().unwrap();
        assert_eq!(spec.variant.name(), "alternating");
        assert_eq!(spec.seed, 42);
        assert_eq!(config.campaign_budget().unwrap().steps, 100_000);
    }

    #[test]
    fn missing_master_seed_is_an_error() {
        let err = RunConfig::parse("[environment]\nvariant = \"alternating\"\n").unwrap_err();
        assert!(err.to_string().contains("master_seed"), "{err}");
    }

    #[test]
    fn unknown_variant_is_named_in_the_error() {
        let err =
            RunConfig::parse("master_seed = 1\n[environment]\nvariant = \"spiral\"\n").unwrap_err();
        assert!(err.to_string().contains("spiral"), "{err}");
    }

    #[test]
    fn defect_variant_requires_beta() {
        let text = "master_seed = 1\n[environment]\nvariant = \"periodic_with_defects\"\n";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let ok = format!("{text}beta = 2.0\n");
        let spec = RunConfig::parse(&ok).unwrap().environment_spec().unwrap();
        assert_eq!(spec.variant.name(), "periodic_with_defects");
    }

    #[test]
    fn explicit_defects_round_trip() {
        let text = "master_seed = 7\n[environment]\nvariant = \"explicit_defects\"\n\
                    defect_levels = [0, 101]\norientation_overrides = [[0, -1]]\n";
        let spec = RunConfig::parse(text).unwrap().environment_spec().unwrap();
        assert_eq!(spec.variant.name(), "explicit_defects");
        let field = spec.field();
        assert_eq!(field.orientation_at(0), -1);
    }

    #[test]
    fn zero_replicas_is_an_error() {
        let text = format!("{MINIMAL}[budget]\nreplicas = 0\n");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("replicas"), "{err}");
    }

    #[test]
    fn bad_checkpoints_are_rejected() {
        let text = format!("{MINIMAL}[budget]\nsteps = 100\ncheckpoints = [50, 40, 100]\n");
        let config = RunConfig::parse(&text).unwrap();
        assert!(config.campaign_budget().is_err());
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let err = RunConfig::parse("master_seed = \"not a number\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = RunConfig::hash_of(MINIMAL);
        assert_eq!(a, RunConfig::hash_of(MINIMAL));
        assert_ne!(a, RunConfig::hash_of("master_seed = 43\n"));
        assert_eq!(a.len(), 64);
    }
}
