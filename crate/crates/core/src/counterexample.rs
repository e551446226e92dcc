//! Iterative construction of a deterministic sparse-defect sequence whose
//! walk stays recurrent, at finite truncation depth.
//!
//! Stage k estimates the quenched Green partial sum of the walk on the
//! alternating lattice with defects at 0 and just past each earlier horizon.
//! The horizon N is doubled until the estimate clears the target a_k with a
//! three-standard-error margin; then L_k = N and the next defect goes at
//! L_k + 1, where no walk of length <= L_k can see it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::partial_sum_samples;
use crate::env::{EnvVariant, EnvironmentSpec, PeriodicPattern};
use crate::fourier::FourierError;
use crate::rng::{self, tags};
use crate::stats;

#[derive(Debug, Error)]
pub enum CounterexampleError {
    #[error("targets must be a strictly increasing positive sequence")]
    BadTargets,
    #[error("estimator budget must allow at least one replica and one step")]
    BadBudget,
    #[error("quadrature failure: {0}")]
    Fourier(#[from] FourierError),
}

/// Replica count and horizon schedule for the stage estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorBudget {
    pub replicas: u32,
    pub initial_steps: u64,
    pub max_steps: u64,
}

impl Default for EstimatorBudget {
    fn default() -> Self {
        Self {
            replicas: 32,
            initial_steps: 1 << 10,
            max_steps: 1 << 26,
        }
    }
}

/// One completed (or failed) stage of the construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    /// 1-based stage index k.
    pub index: usize,
    /// Target a_k.
    pub target: f64,
    /// Chosen horizon L_k.
    pub horizon: u64,
    /// Defect levels visible to this stage: 0 and L_j + 1 for j < k.
    pub defect_levels: Vec<i64>,
    /// Estimated partial sum at the horizon.
    pub partial_sum: f64,
    pub standard_error: f64,
}

/// Stage where the builder gave up, with the last estimate reached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildFailure {
    pub stage: usize,
    pub target: f64,
    pub last_horizon: u64,
    pub last_partial_sum: f64,
    pub last_standard_error: f64,
}

/// Serializable witness of the construction up to stage k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefectCertificate {
    pub targets: Vec<f64>,
    pub env_seed: u64,
    pub master_seed: u64,
    pub budget: EstimatorBudget,
    pub stages: Vec<StageRecord>,
    pub failure: Option<BuildFailure>,
}

impl DefectCertificate {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.stages.len() == self.targets.len()
    }

    /// The environment seen by walks of stage k (1-based).
    pub fn stage_environment(&self, k: usize) -> EnvironmentSpec {
        stage_environment(&self.stages[k - 1].defect_levels, self.env_seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn stage_environment(defect_levels: &[i64], env_seed: u64) -> EnvironmentSpec {
    EnvironmentSpec::new(
        EnvVariant::ExplicitDefects {
            pattern: PeriodicPattern::alternating(),
            defect_levels: defect_levels.iter().copied().collect(),
            orientation_overrides: Default::default(),
        },
        env_seed,
    )
}

fn stage_master_seed(master_seed: u64, stage: usize) -> u64 {
    rng::derive_key(&[master_seed, tags::RESAMPLE, stage as u64])
}

/// Build a certificate for the strictly increasing target sequence `a`.
pub fn build(
    a: &[f64],
    budget: &EstimatorBudget,
    env_seed: u64,
    master_seed: u64,
) -> Result<DefectCertificate, CounterexampleError> {
    if a.is_empty() || a[0] <= 0.0 || a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CounterexampleError::BadTargets);
    }
    if budget.replicas == 0 || budget.initial_steps == 0 || budget.max_steps < budget.initial_steps
    {
        return Err(CounterexampleError::BadBudget);
    }
    let mut cert = DefectCertificate {
        targets: a.to_vec(),
        env_seed,
        master_seed,
        budget: budget.clone(),
        stages: Vec::new(),
        failure: None,
    };
    let mut defect_levels = vec![0i64];
    let mut previous_horizon = 0u64;
    for (i, &target) in a.iter().enumerate() {
        let stage = i + 1;
        let spec = stage_environment(&defect_levels, env_seed);
        let seed = stage_master_seed(master_seed, stage);
        let mut n = budget.initial_steps.max(previous_horizon + 1);
        let (horizon, mean, se) = loop {
            let samples = partial_sum_samples(&spec, n, budget.replicas, seed)?;
            let (mean, se) = stats::mean_and_se(&samples);
            if mean - 3.0 * se >= target {
                break (n, mean, se);
            }
            if n >= budget.max_steps {
                cert.failure = Some(BuildFailure {
                    stage,
                    target,
                    last_horizon: n,
                    last_partial_sum: mean,
                    last_standard_error: se,
                });
                return Ok(cert);
            }
            n = (n * 2).min(budget.max_steps);
        };
        cert.stages.push(StageRecord {
            index: stage,
            target,
            horizon,
            defect_levels: defect_levels.clone(),
            partial_sum: mean,
            standard_error: se,
        });
        // the next defect sits just past the horizon, invisible to any walk
        // of length <= L_k
        defect_levels.push(horizon as i64 + 1);
        previous_horizon = horizon;
    }
    Ok(cert)
}

/// Outcome of re-estimating one stage with fresh randomness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageVerification {
    pub index: usize,
    pub target: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub stages: Vec<StageVerification>,
}

/// Re-estimate every completed stage with fresh skeleton randomness; each
/// stage passes iff its partial sum clears the target within three standard
/// errors.
pub fn verify(
    cert: &DefectCertificate,
    fresh_seed: u64,
) -> Result<VerifyReport, CounterexampleError> {
    let mut stages = Vec::with_capacity(cert.stages.len());
    let mut ok = true;
    for stage in &cert.stages {
        let spec = stage_environment(&stage.defect_levels, cert.env_seed);
        let seed = stage_master_seed(fresh_seed, stage.index);
        let samples = partial_sum_samples(&spec, stage.horizon, cert.budget.replicas, seed)?;
        let (mean, se) = stats::mean_and_se(&samples);
        let pass = mean + 3.0 * se >= stage.target;
        ok &= pass;
        stages.push(StageVerification {
            index: stage.index,
            target: stage.target,
            estimate: mean,
            standard_error: se,
            ok: pass,
        });
    }
    Ok(VerifyReport { ok, stages })
}

/// Exact replay check of prefix stability: walks of horizon <= L_k produce
/// bitwise identical partial sums under the stage-k defect set and under the
/// full final defect set, because no level past L_k is ever queried.
pub fn prefix_stability_holds(cert: &DefectCertificate) -> Result<bool, CounterexampleError> {
    let full_levels: Vec<i64> = match cert.stages.last() {
        Some(last) => {
            let mut levels = last.defect_levels.clone();
            levels.push(last.horizon as i64 + 1);
            levels
        }
        None => return Ok(true),
    };
    let full = stage_environment(&full_levels, cert.env_seed);
    for stage in &cert.stages {
        let truncated = stage_environment(&stage.defect_levels, cert.env_seed);
        let seed = stage_master_seed(cert.master_seed, stage.index);
        let a = partial_sum_samples(&truncated, stage.horizon, cert.budget.replicas, seed)?;
        // the full environment also carries the later defects; they sit past
        // every level a walk of this horizon can reach
        let later: Vec<i64> = full_levels
            .iter()
            .copied()
            .filter(|l| !stage.defect_levels.contains(l))
            .collect();
        if later.iter().any(|&l| l <= stage.horizon as i64) {
            return Ok(false);
        }
        let b = partial_sum_samples(&full, stage.horizon, cert.budget.replicas, seed)?;
        if a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Ok(false);
        }
    }
    // the truncated defect sequence carries exactly k defects at stage k
    Ok(cert
        .stages
        .iter()
        .all(|s| s.defect_levels.len() == s.index))
}

/// Deterministic single defect at 0: the diagnostics classifier should still
/// lean recurrent. Convenience wrapper used by tests and the CLI.
pub fn single_defect_spec(env_seed: u64) -> EnvironmentSpec {
    stage_environment(&[0], env_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{classify, CampaignBudget, ClassifyThresholds, EventThresholds};

    fn small_budget() -> EstimatorBudget {
        EstimatorBudget {
            replicas: 16,
            initial_steps: 256,
            max_steps: 1 << 18,
        }
    }

    #[test]
    fn tiny_target_is_met_by_the_unit_term() {
        // the n = 0 term alone contributes 1, so a_1 < 1 clears immediately
        let cert = build(&[0.5], &small_budget(), 3, 41).unwrap();
        assert!(cert.is_complete());
        assert_eq!(cert.stages.len(), 1);
        assert_eq!(cert.stages[0].horizon, 256);
        assert!(cert.stages[0].partial_sum - 3.0 * cert.stages[0].standard_error >= 0.5);
        assert!(verify(&cert, 999).unwrap().ok);
    }

    #[test]
    fn bad_targets_are_rejected() {
        let b = small_budget();
        assert!(matches!(
            build(&[], &b, 0, 0),
            Err(CounterexampleError::BadTargets)
        ));
        assert!(matches!(
            build(&[1.0, 1.0], &b, 0, 0),
            Err(CounterexampleError::BadTargets)
        ));
        assert!(matches!(
            build(&[-1.0, 2.0], &b, 0, 0),
            Err(CounterexampleError::BadTargets)
        ));
    }

    #[test]
    fn horizons_increase_and_defects_stay_invisible() {
        let cert = build(&[1.0, 1.5], &small_budget(), 7, 42).unwrap();
        assert!(cert.is_complete());
        let l: Vec<u64> = cert.stages.iter().map(|s| s.horizon).collect();
        assert!(l[0] < l[1]);
        assert_eq!(cert.stages[0].defect_levels, vec![0]);
        assert_eq!(
            cert.stages[1].defect_levels,
            vec![0, cert.stages[0].horizon as i64 + 1]
        );
        assert!(prefix_stability_holds(&cert).unwrap());
    }

    #[test]
    fn exhausted_budget_reports_the_failing_stage() {
        let budget = EstimatorBudget {
            replicas: 8,
            initial_steps: 64,
            max_steps: 128,
        };
        let cert = build(&[1.0, 50.0], &budget, 7, 43).unwrap();
        assert!(!cert.is_complete());
        let failure = cert.failure.as_ref().unwrap();
        assert_eq!(failure.stage, 2);
        assert_eq!(failure.last_horizon, 128);
        assert_eq!(cert.stages.len(), 1);
    }

    #[test]
    fn tampered_certificate_fails_verification() {
        let mut cert = build(&[1.0, 1.5], &small_budget(), 7, 44).unwrap();
        assert!(verify(&cert, 555).unwrap().ok);
        // shrink the final horizon to a scale where the target is unreachable
        cert.stages.last_mut().unwrap().horizon = 1;
        let report = verify(&cert, 555).unwrap();
        assert!(!report.ok);
        assert!(!report.stages.last().unwrap().ok);
    }

    #[test]
    fn json_round_trip_preserves_the_certificate() {
        let cert = build(&[0.5], &small_budget(), 3, 45).unwrap();
        let json = cert.to_json();
        let back = DefectCertificate::from_json(&json).unwrap();
        assert_eq!(back.stages[0].horizon, cert.stages[0].horizon);
        assert_eq!(back.env_seed, cert.env_seed);
        assert_eq!(back.targets, cert.targets);
    }

    #[test]
    fn single_defect_environment_leans_recurrent() {
        let report = classify(
            &single_defect_spec(9),
            &CampaignBudget::new(1_000_000, 10),
            &EventThresholds::default(),
            &ClassifyThresholds::default(),
            46,
        )
        .unwrap();
        assert_eq!(
            report.evidence,
            crate::diagnostics::Evidence::RecurrentLeaning
        );
    }
}
