//! Horizontal-orientation environments.
//!
//! An environment assigns to every level `y` a direction `epsilon_y` in
//! {-1, +1}. All variants are resolved lazily and deterministically from
//! `(spec, y)` through keyed randomness, so fields are infinite, two-sided,
//! order-independent and safe to query concurrently.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, tags};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("pattern period must be an even integer >= 2, got {0}")]
    OddOrShortPeriod(usize),
    #[error("pattern values must sum to zero over one period (sum = {0})")]
    NonZeroPatternSum(i64),
    #[error("pattern values must be -1 or +1, got {0}")]
    BadPatternValue(i8),
    #[error("pattern value count {got} does not match period {period}")]
    PeriodMismatch { period: usize, got: usize },
    #[error("defect law requires beta > 0 and c > 0, got beta={beta}, c={c}")]
    BadDefectLaw { beta: f64, c: f64 },
    #[error("defect law requires inner_radius >= 1, got {0}")]
    BadInnerRadius(i64),
    #[error("orientation override must be -1 or +1, got {0}")]
    BadOverride(i8),
    #[error("variant {0} has no defect notion")]
    NoDefectNotion(&'static str),
}

/// Q-periodic base orientation f with zero mean over one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicPattern {
    period: usize,
    values: Vec<i8>,
}

impl PeriodicPattern {
    pub fn new(values: Vec<i8>) -> Result<Self, EnvError> {
        let period = values.len();
        if period < 2 || period % 2 != 0 {
            return Err(EnvError::OddOrShortPeriod(period));
        }
        for &v in &values {
            if v != 1 && v != -1 {
                return Err(EnvError::BadPatternValue(v));
            }
        }
        let sum: i64 = values.iter().map(|&v| v as i64).sum();
        if sum != 0 {
            return Err(EnvError::NonZeroPatternSum(sum));
        }
        Ok(Self { period, values })
    }

    /// The alternating pattern (+1, -1), i.e. f(y) = (-1)^y.
    pub fn alternating() -> Self {
        Self::new(vec![1, -1]).unwrap()
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// f(y mod Q), valid for any signed level.
    #[inline]
    pub fn at(&self, y: i64) -> i8 {
        self.values[y.rem_euclid(self.period as i64) as usize]
    }
}

/// Law of the defect indicators: P(lambda_y = 1) = min(1, c / |y|^beta)
/// for |y| >= inner_radius, and min(1, c) closer to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectLaw {
    beta: f64,
    c: f64,
    inner_radius: i64,
}

impl DefectLaw {
    pub fn new(beta: f64, c: f64, inner_radius: i64) -> Result<Self, EnvError> {
        if !(beta > 0.0) || !(c > 0.0) {
            return Err(EnvError::BadDefectLaw { beta, c });
        }
        if inner_radius < 1 {
            return Err(EnvError::BadInnerRadius(inner_radius));
        }
        Ok(Self {
            beta,
            c,
            inner_radius,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn inner_radius(&self) -> i64 {
        self.inner_radius
    }

    /// Defect probability at level y, always in [0, 1].
    pub fn probability_at(&self, y: i64) -> f64 {
        let p = if y.unsigned_abs() < self.inner_radius as u64 {
            self.c
        } else {
            self.c / (y.abs() as f64).powf(self.beta)
        };
        p.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EnvVariant {
    /// epsilon_y = (-1)^y.
    Alternating,
    /// epsilon_y = -1 for y < 0 and +1 for y >= 0.
    HalfPlane,
    /// I.i.d. uniform signs.
    IidUniform,
    /// Periodic base pattern perturbed by random defects.
    PeriodicWithDefects {
        pattern: PeriodicPattern,
        law: DefectLaw,
    },
    /// Periodic base pattern with a fixed set of defect levels. A defect
    /// level takes the keyed random sign unless an explicit override is
    /// supplied for it.
    ExplicitDefects {
        pattern: PeriodicPattern,
        defect_levels: BTreeSet<i64>,
        #[serde(default)]
        orientation_overrides: BTreeMap<i64, i8>,
    },
}

impl EnvVariant {
    pub fn name(&self) -> &'static str {
        match self {
            EnvVariant::Alternating => "alternating",
            EnvVariant::HalfPlane => "half_plane",
            EnvVariant::IidUniform => "iid_uniform",
            EnvVariant::PeriodicWithDefects { .. } => "periodic_with_defects",
            EnvVariant::ExplicitDefects { .. } => "explicit_defects",
        }
    }

    /// Whether the replica seed also redraws the environment. Alternating,
    /// half-plane and explicit-defect environments are quenched: they do
    /// not change across campaign replicas.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            EnvVariant::IidUniform | EnvVariant::PeriodicWithDefects { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub variant: EnvVariant,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn new(variant: EnvVariant, seed: u64) -> Self {
        Self { variant, seed }
    }

    /// Same variant, different seed (replica fan-out).
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            variant: self.variant.clone(),
            seed,
        }
    }

    pub fn field(&self) -> OrientationField {
        OrientationField { spec: self.clone() }
    }
}

/// Lazily evaluated orientation field. Every query is a pure function of
/// `(spec, y)`; there is no mutable state, so the field is trivially safe
/// for concurrent use.
#[derive(Debug, Clone)]
pub struct OrientationField {
    spec: EnvironmentSpec,
}

impl OrientationField {
    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    /// epsilon_y.
    pub fn orientation_at(&self, y: i64) -> i8 {
        let seed = self.spec.seed;
        match &self.spec.variant {
            EnvVariant::Alternating => {
                if y.rem_euclid(2) == 0 {
                    1
                } else {
                    -1
                }
            }
            EnvVariant::HalfPlane => {
                if y < 0 {
                    -1
                } else {
                    1
                }
            }
            EnvVariant::IidUniform => rng::sign_at(&[seed, tags::EPSILON, y as u64]),
            EnvVariant::PeriodicWithDefects { pattern, law } => {
                if rng::bernoulli_at(&[seed, tags::LAMBDA, y as u64], law.probability_at(y)) {
                    rng::sign_at(&[seed, tags::RHO, y as u64])
                } else {
                    pattern.at(y)
                }
            }
            EnvVariant::ExplicitDefects {
                pattern,
                defect_levels,
                orientation_overrides,
            } => {
                if defect_levels.contains(&y) {
                    match orientation_overrides.get(&y) {
                        Some(&s) => s,
                        None => rng::sign_at(&[seed, tags::RHO, y as u64]),
                    }
                } else {
                    pattern.at(y)
                }
            }
        }
    }

    /// lambda_y for variants with a defect notion.
    pub fn defect_indicator(&self, y: i64) -> Result<bool, EnvError> {
        match &self.spec.variant {
            EnvVariant::PeriodicWithDefects { law, .. } => Ok(rng::bernoulli_at(
                &[self.spec.seed, tags::LAMBDA, y as u64],
                law.probability_at(y),
            )),
            EnvVariant::ExplicitDefects { defect_levels, .. } => Ok(defect_levels.contains(&y)),
            other => Err(EnvError::NoDefectNotion(other.name())),
        }
    }

    /// ||lambda restricted to [-k, k]||: number of defect levels in the window.
    pub fn truncated_strength(&self, k: i64) -> Result<u64, EnvError> {
        let mut count = 0;
        for y in -k..=k {
            if self.defect_indicator(y)? {
                count += 1;
            }
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit(levels: &[i64]) -> EnvironmentSpec {
        EnvironmentSpec::new(
            EnvVariant::ExplicitDefects {
                pattern: PeriodicPattern::alternating(),
                defect_levels: levels.iter().copied().collect(),
                orientation_overrides: BTreeMap::new(),
            },
            7,
        )
    }

    #[test]
    fn pattern_constructor_rejects_bad_inputs() {
        assert_eq!(
            PeriodicPattern::new(vec![1, -1, 1]).unwrap_err(),
            EnvError::OddOrShortPeriod(3)
        );
        assert_eq!(
            PeriodicPattern::new(vec![1, 1]).unwrap_err(),
            EnvError::NonZeroPatternSum(2)
        );
        assert!(matches!(
            PeriodicPattern::new(vec![0, 1]).unwrap_err(),
            EnvError::BadPatternValue(0)
        ));
        assert!(PeriodicPattern::new(vec![1, 1, -1, -1]).is_ok());
    }

    #[test]
    fn alternating_matches_parity() {
        let field = EnvironmentSpec::new(EnvVariant::Alternating, 0).field();
        assert_eq!(field.orientation_at(3), -1);
        assert_eq!(field.orientation_at(0), 1);
        assert_eq!(field.orientation_at(-2), 1);
        assert_eq!(field.orientation_at(-3), -1);
    }

    #[test]
    fn half_plane_splits_at_zero() {
        let field = EnvironmentSpec::new(EnvVariant::HalfPlane, 0).field();
        assert_eq!(field.orientation_at(-1), -1);
        assert_eq!(field.orientation_at(0), 1);
    }

    #[test]
    fn defect_free_limit_is_the_pure_pattern() {
        // defect probability forced to ~0 everywhere: c tiny
        let law = DefectLaw::new(2.0, 1e-308, 1).unwrap();
        let pattern = PeriodicPattern::alternating();
        let field = EnvironmentSpec::new(
            EnvVariant::PeriodicWithDefects {
                pattern: pattern.clone(),
                law,
            },
            11,
        )
        .field();
        assert_eq!(field.orientation_at(4), 1);
        for y in -50..50 {
            assert_eq!(field.orientation_at(y), pattern.at(y));
        }
    }

    #[test]
    fn explicit_defect_membership_and_strength() {
        let field = explicit(&[0]).field();
        assert!(field.defect_indicator(0).unwrap());
        assert!(!field.defect_indicator(7).unwrap());
        assert_eq!(field.truncated_strength(5).unwrap(), 1);

        let field = explicit(&[0, 4, -9]).field();
        assert_eq!(field.truncated_strength(4).unwrap(), 2);

        // empty set reproduces the pure periodic environment
        let field = explicit(&[]).field();
        let pattern = PeriodicPattern::alternating();
        for y in -20..20 {
            assert_eq!(field.orientation_at(y), pattern.at(y));
        }
    }

    #[test]
    fn no_defect_notion_is_rejected() {
        let field = EnvironmentSpec::new(EnvVariant::Alternating, 0).field();
        assert_eq!(
            field.defect_indicator(0).unwrap_err(),
            EnvError::NoDefectNotion("alternating")
        );
    }

    #[test]
    fn orientation_overrides_take_precedence() {
        let spec = EnvironmentSpec::new(
            EnvVariant::ExplicitDefects {
                pattern: PeriodicPattern::alternating(),
                defect_levels: [0, 3].into_iter().collect(),
                orientation_overrides: [(0, -1)].into_iter().collect(),
            },
            7,
        );
        let field = spec.field();
        assert_eq!(field.orientation_at(0), -1);
        // level 3 falls back to the keyed random sign, deterministically
        assert_eq!(field.orientation_at(3), spec.field().orientation_at(3));
    }

    #[test]
    fn defect_frequency_tracks_the_law() {
        // beta=2, c=1, |y|=100: P(lambda=1) = 1e-4; check over many seeds
        let law = DefectLaw::new(2.0, 1.0, 1).unwrap();
        let pattern = PeriodicPattern::alternating();
        let y = 100i64;
        let p = law.probability_at(y);
        assert!((p - 1e-4).abs() < 1e-12);
        let n = 100_000u64;
        let mut hits = 0u64;
        for seed in 0..n {
            let field = EnvironmentSpec::new(
                EnvVariant::PeriodicWithDefects {
                    pattern: pattern.clone(),
                    law: law.clone(),
                },
                seed,
            )
            .field();
            if field.defect_indicator(y).unwrap() {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * sd, "freq {freq}, p {p}");
    }

    #[test]
    fn conditional_sign_is_fair_given_a_defect() {
        // law correctness: conditional on lambda=1 the sign is uniform
        let law = DefectLaw::new(2.0, 1.0, 1).unwrap();
        let y = 2i64; // P(defect) = 1/4
        let mut defects = 0u64;
        let mut plus = 0u64;
        for seed in 0..40_000u64 {
            let field = EnvironmentSpec::new(
                EnvVariant::PeriodicWithDefects {
                    pattern: PeriodicPattern::alternating(),
                    law: law.clone(),
                },
                seed,
            )
            .field();
            if field.defect_indicator(y).unwrap() {
                defects += 1;
                if field.orientation_at(y) == 1 {
                    plus += 1;
                }
            } else {
                // conditional on lambda=0 the pattern is reproduced exactly
                assert_eq!(field.orientation_at(y), 1);
            }
        }
        let freq = plus as f64 / defects as f64;
        let sd = (0.25 / defects as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * sd, "freq {freq}");
    }

    #[test]
    fn truncated_strength_mean_matches_law_sum() {
        let law = DefectLaw::new(2.0, 1.0, 1).unwrap();
        let k = 1000i64;
        let expected: f64 = (-k..=k).map(|y| law.probability_at(y)).sum();
        let replicas = 2_000u64;
        let mut total = 0u64;
        for seed in 0..replicas {
            let field = EnvironmentSpec::new(
                EnvVariant::PeriodicWithDefects {
                    pattern: PeriodicPattern::alternating(),
                    law: law.clone(),
                },
                seed ^ 0xabcd,
            )
            .field();
            total += field.truncated_strength(k).unwrap();
        }
        let mean = total as f64 / replicas as f64;
        // strength is a sum of independent Bernoullis; variance < expected
        let se = (expected / replicas as f64).sqrt();
        assert!((mean - expected).abs() < 5.0 * se, "mean {mean} vs {expected}");
    }
}
