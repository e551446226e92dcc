//! Campaign-level estimators and verifiers: Green-function partial sums,
//! recurrence/transience evidence, threshold event statistics, occupation
//! entropy, the Gaussian-smoothing inequality, the conditioned-occupation
//! formula, and the strip decomposition of crossing increments.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::env::{EnvironmentSpec, OrientationField};
use crate::fourier::{CharFnParams, FourierError, Pmf, ReturnProbEvaluator};
use crate::rng::{self, tags, Stream};
use crate::skeleton::{crossing_times, embedded_path, SkeletonTrace, WaitingTimes};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("trace has {available} strip crossings, need {needed}")]
    NotEnoughCrossings { needed: usize, available: usize },
    #[error("quadrature failure: {0}")]
    Fourier(#[from] FourierError),
}

/// Thresholds d_{n,i} = n^(1/2 + delta_i) for the event statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EventThresholds {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl Default for EventThresholds {
    fn default() -> Self {
        Self {
            delta1: 0.1,
            delta2: 0.1,
            delta3: 0.1,
        }
    }
}

impl EventThresholds {
    pub fn new(delta1: f64, delta2: f64, delta3: f64) -> Self {
        assert!(delta1 > 0.0 && delta2 > 0.0 && delta3 > 0.0);
        Self {
            delta1,
            delta2,
            delta3,
        }
    }

    pub fn d1(&self, n: u64) -> f64 {
        (n as f64).powf(0.5 + self.delta1)
    }

    pub fn d2(&self, n: u64) -> f64 {
        (n as f64).powf(0.5 + self.delta2)
    }

    pub fn d3(&self, n: u64) -> f64 {
        (n as f64).powf(0.5 + self.delta3)
    }
}

/// Per-replica indicator values of the three events over a 2n-step skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventIndicators {
    /// max_{k<=2n} |Y_k| < d_{n,1}
    pub a1: bool,
    /// max_y eta_{2n-1}(y) < d_{n,2}
    pub a2: bool,
    /// a1 and a2 and |sum_y eps_y eta_{2n-1}(y)| > d_{n,3}
    pub b: bool,
}

impl EventIndicators {
    pub fn a(&self) -> bool {
        self.a1 && self.a2
    }
}

/// Empirical frequencies of the events over replicas.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EventFrequencies {
    pub replicas: u32,
    pub a1: f64,
    pub a2: f64,
    pub a: f64,
    pub b: f64,
}

fn indicators_for_trace(
    trace: &SkeletonTrace,
    n: u64,
    thresholds: &EventThresholds,
    field: &OrientationField,
) -> EventIndicators {
    let two_n = 2 * n;
    assert!(trace.steps() >= two_n);
    let max_abs_y = trace.positions()[..=two_n as usize]
        .iter()
        .map(|y| y.unsigned_abs())
        .max()
        .unwrap();
    let eta = trace.occupation_prefix(two_n - 1);
    let max_eta = eta.values().copied().max().unwrap();
    let weighted: i64 = eta
        .iter()
        .map(|(&y, &count)| field.orientation_at(y) as i64 * count as i64)
        .sum();
    let a1 = (max_abs_y as f64) < thresholds.d1(n);
    let a2 = (max_eta as f64) < thresholds.d2(n);
    EventIndicators {
        a1,
        a2,
        b: a1 && a2 && (weighted.abs() as f64) > thresholds.d3(n),
    }
}

/// Empirical frequencies of the three events at horizon 2n over independent
/// skeleton replicas.
pub fn event_frequencies(
    n: u64,
    thresholds: &EventThresholds,
    field: &OrientationField,
    replicas: u32,
    master_seed: u64,
) -> EventFrequencies {
    assert!(replicas >= 1 && n >= 1);
    let mut counts = (0u32, 0u32, 0u32, 0u32);
    for r in 0..replicas {
        let mut stream = Stream::new(&[master_seed, tags::REPLICA, r as u64, tags::SKELETON]);
        let trace = SkeletonTrace::simulate(2 * n, &mut stream);
        let ind = indicators_for_trace(&trace, n, thresholds, field);
        counts.0 += ind.a1 as u32;
        counts.1 += ind.a2 as u32;
        counts.2 += ind.a() as u32;
        counts.3 += ind.b as u32;
    }
    let denom = replicas as f64;
    EventFrequencies {
        replicas,
        a1: counts.0 as f64 / denom,
        a2: counts.1 as f64 / denom,
        a: counts.2 as f64 / denom,
        b: counts.3 as f64 / denom,
    }
}

/// Normalized occupation profile pi_n(y) = eta_{2n-1}(y) / 2n with its
/// entropy and support size.
#[derive(Debug, Clone)]
pub struct OccupationProfile {
    pub pi: HashMap<i64, f64>,
    pub entropy: f64,
    pub support: usize,
}

pub fn entropy_profile(trace: &SkeletonTrace, n: u64) -> OccupationProfile {
    assert!(n >= 1 && trace.steps() >= 2 * n - 1);
    let eta = trace.occupation_prefix(2 * n - 1);
    let total = 2.0 * n as f64;
    let pi: HashMap<i64, f64> = eta
        .into_iter()
        .map(|(y, count)| (y, count as f64 / total))
        .collect();
    let entropy = pi
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    OccupationProfile {
        support: pi.len(),
        pi,
        entropy,
    }
}

/// Result of one Gaussian-smoothing inequality evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks P(|Z| <= d/2) <= sqrt(2 pi e) * P(|Z + G| <= d) for an integer law
/// `pmf` and G a centred normal of variance d^2.
pub fn gaussian_smoothing_check(pmf: &Pmf, d: u64) -> SmoothingCheck {
    assert!(d >= 1);
    let total = pmf.total_mass();
    assert!((total - 1.0).abs() < 1e-9, "law not normalized: {total}");
    let d = d as f64;
    let half = d / 2.0;
    let constant = (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt();
    let mut lhs = 0.0;
    let mut smoothed = 0.0;
    for (i, &mass) in pmf.probs.iter().enumerate() {
        let z = (pmf.offset + i as i64) as f64;
        if z.abs() <= half {
            lhs += mass;
        }
        smoothed += mass * (stats::normal_cdf((d - z) / d) - stats::normal_cdf((-d - z) / d));
    }
    let rhs = constant * smoothed;
    SmoothingCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

/// One-step transition power of the simple symmetric walk on Z:
/// P^l(0, z) = C(l, (l+z)/2) / 2^l, zero off the parity cone.
pub fn srw_transition(l: u64, z: i64) -> f64 {
    if z.unsigned_abs() > l || (l as i64 + z) % 2 != 0 {
        return 0.0;
    }
    let k = ((l as i64 + z) / 2) as f64;
    let l = l as f64;
    (ln_gamma(l + 1.0) - ln_gamma(k + 1.0) - ln_gamma(l - k + 1.0) - l * 2f64.ln()).exp()
}

/// Exact conditional mean occupation of the crossing walk at level z:
/// E_0[varpi_{2n}(z) | Z_{2n} = 0] = sum_{k=1}^{2n} P^k(0,z) P^{2n-k}(z,0) / P^{2n}(0,0).
pub fn conditioned_occupation(two_n: u64, z: i64) -> f64 {
    assert!(two_n >= 2 && two_n % 2 == 0);
    assert!(z.unsigned_abs() <= two_n);
    let denom = srw_transition(two_n, 0);
    (1..=two_n)
        .map(|k| srw_transition(k, z) * srw_transition(two_n - k, -z) / denom)
        .sum()
}

/// Crossing increments classified into near-strip and far-strip index sets.
#[derive(Debug, Clone)]
pub struct StripSets {
    pub l: i64,
    pub strip_width: i64,
    /// Indices k with both |Y_{tau_k}| and |Y_{tau_{k+1}}| <= L*Q.
    pub f: Vec<usize>,
    /// Indices k with both endpoints at distance >= L*Q.
    pub g: Vec<usize>,
    /// theta_k = X_{tau_{k+1}} - X_{tau_k}.
    pub theta: Vec<i64>,
    /// X at each crossing time, tau_0..tau_{2n}.
    pub x_at_tau: Vec<i64>,
}

impl StripSets {
    pub fn f_sum(&self) -> i64 {
        self.f.iter().map(|&k| self.theta[k]).sum()
    }

    pub fn g_sum(&self) -> i64 {
        self.g.iter().map(|&k| self.theta[k]).sum()
    }
}

/// Classify the first 2n crossings of the trace and verify the exact
/// decomposition X_{tau_{2n}} = sum_F theta_k + sum_G theta_k.
pub fn strip_decomposition<T: WaitingTimes>(
    trace: &SkeletonTrace,
    field: &OrientationField,
    table: &T,
    q: i64,
    l: i64,
    two_n: usize,
) -> Result<StripSets, DiagnosticsError> {
    assert!(l >= 0);
    let times = crossing_times(trace, q).expect("valid strip width");
    if times.crossings() < two_n {
        return Err(DiagnosticsError::NotEnoughCrossings {
            needed: two_n,
            available: times.crossings(),
        });
    }
    let xs = embedded_path(trace, table, field);
    let x_at_tau: Vec<i64> = times.tau[..=two_n].iter().map(|&t| xs[t as usize]).collect();
    let theta: Vec<i64> = x_at_tau.windows(2).map(|w| w[1] - w[0]).collect();
    let bound = l * q;
    let mut f = Vec::new();
    let mut g = Vec::new();
    for k in 0..two_n {
        let (a, b) = (times.z[k] * q, times.z[k + 1] * q);
        if a.abs() <= bound && b.abs() <= bound {
            f.push(k);
        } else if a.abs() >= bound && b.abs() >= bound {
            g.push(k);
        }
    }
    // crossing endpoints differ by exactly Q, so the near/far split is a
    // partition of the indices and the telescoping identity is exact
    assert_eq!(f.len() + g.len(), two_n);
    let sets = StripSets {
        l,
        strip_width: q,
        f,
        g,
        theta,
        x_at_tau,
    };
    assert_eq!(sets.f_sum() + sets.g_sum(), sets.x_at_tau[two_n]);
    Ok(sets)
}

/// Horizon, replica count, and checkpoint grid of a campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignBudget {
    pub steps: u64,
    pub replicas: u32,
    pub checkpoints: Vec<u64>,
}

impl CampaignBudget {
    pub fn new(steps: u64, replicas: u32) -> Self {
        Self {
            steps,
            replicas,
            checkpoints: default_checkpoints(steps),
        }
    }
}

/// Logarithmic checkpoint grid, about four per decade from 10^3 up to and
/// including the horizon.
pub fn default_checkpoints(steps: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let ratio = 10f64.powf(0.25);
    let mut value = 1000f64;
    while (value.round() as u64) < steps {
        grid.push(value.round() as u64);
        value *= ratio;
    }
    grid.push(steps);
    grid.dedup();
    grid
}

/// One checkpoint of one replica's Green partial sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub steps: u64,
    pub partial_sum: f64,
    pub returns: u64,
}

/// Everything recorded about one replica of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: u32,
    pub env_seed: u64,
    pub walk_seed: u64,
    pub checkpoints: Vec<CheckpointRecord>,
    pub events: EventIndicators,
}

impl ReplicaRecord {
    pub fn final_partial_sum(&self) -> f64 {
        self.checkpoints.last().expect("nonempty checkpoints").partial_sum
    }
}

/// Aggregated campaign output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub spec: EnvironmentSpec,
    pub master_seed: u64,
    pub budget: CampaignBudget,
    pub thresholds: EventThresholds,
    pub replicas: Vec<ReplicaRecord>,
}

impl CampaignResult {
    pub fn final_partial_sums(&self) -> Vec<f64> {
        self.replicas.iter().map(ReplicaRecord::final_partial_sum).collect()
    }

    pub fn event_frequencies(&self) -> EventFrequencies {
        let n = self.replicas.len() as f64;
        EventFrequencies {
            replicas: self.replicas.len() as u32,
            a1: self.replicas.iter().filter(|r| r.events.a1).count() as f64 / n,
            a2: self.replicas.iter().filter(|r| r.events.a2).count() as f64 / n,
            a: self.replicas.iter().filter(|r| r.events.a()).count() as f64 / n,
            b: self.replicas.iter().filter(|r| r.events.b).count() as f64 / n,
        }
    }
}

fn run_replica(
    spec: &EnvironmentSpec,
    budget: &CampaignBudget,
    thresholds: &EventThresholds,
    master_seed: u64,
    replica: u32,
) -> Result<ReplicaRecord, FourierError> {
    let env_seed = if spec.variant.is_random() {
        rng::derive_key(&[master_seed, tags::ENV, replica as u64])
    } else {
        spec.seed
    };
    let field = spec.with_seed(env_seed).field();
    let eps0 = field.orientation_at(0);
    let walk_seed = rng::derive_key(&[master_seed, tags::REPLICA, replica as u64]);
    let mut stream = Stream::new(&[walk_seed, tags::SKELETON]);
    let mut evaluator = ReturnProbEvaluator::new(CharFnParams::default());

    let steps = budget.steps;
    let mut occupation: HashMap<i64, u64> = HashMap::new();
    occupation.insert(0, 1);
    // signed occupation sum over the prefix seen so far
    let mut weighted = eps0 as i64;
    let mut max_eta = 1u64;
    let mut max_abs_y = 0u64;
    let mut y = 0i64;
    // the n = 0 term: the walk starts at the origin
    let mut partial = 1.0f64;
    let mut returns = 0u64;
    let mut checkpoints = Vec::with_capacity(budget.checkpoints.len());
    let mut next_checkpoint = 0usize;

    for t in 1..=steps {
        y += stream.next_sign() as i64;
        max_abs_y = max_abs_y.max(y.unsigned_abs());
        if y == 0 {
            returns += 1;
            partial += evaluator.interval_hit_summary(t, weighted, eps0)?;
        }
        // eta_{2n-1} excludes the final instant, so event bookkeeping stops
        // one step short while max |Y| covers the whole horizon
        if t < steps {
            let count = occupation.entry(y).or_insert(0);
            *count += 1;
            max_eta = max_eta.max(*count);
            weighted += field.orientation_at(y) as i64;
        }
        if next_checkpoint < budget.checkpoints.len() && t == budget.checkpoints[next_checkpoint] {
            checkpoints.push(CheckpointRecord {
                steps: t,
                partial_sum: partial,
                returns,
            });
            next_checkpoint += 1;
        }
    }

    let n = steps / 2;
    let a1 = (max_abs_y as f64) < thresholds.d1(n);
    let a2 = (max_eta as f64) < thresholds.d2(n);
    let events = EventIndicators {
        a1,
        a2,
        b: a1 && a2 && (weighted.abs() as f64) > thresholds.d3(n),
    };
    Ok(ReplicaRecord {
        replica,
        env_seed,
        walk_seed,
        checkpoints,
        events,
    })
}

/// Quenched Green partial sums over replicas: for each replica environment,
/// stream the skeleton and at each return instant sigma_n <= N add the
/// interval-hit probability of the accumulated occupation law.
pub fn green_partial_sums(
    spec: &EnvironmentSpec,
    budget: &CampaignBudget,
    thresholds: &EventThresholds,
    master_seed: u64,
) -> Result<CampaignResult, FourierError> {
    assert!(budget.steps >= 1 && budget.replicas >= 1);
    assert!(budget.checkpoints.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(budget.checkpoints.last(), Some(&budget.steps));
    let replicas = (0..budget.replicas)
        .into_par_iter()
        .map(|r| run_replica(spec, budget, thresholds, master_seed, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignResult {
        spec: spec.clone(),
        master_seed,
        budget: budget.clone(),
        thresholds: *thresholds,
        replicas,
    })
}

/// Final partial sums only, one per replica. Used by the certificate builder.
pub fn partial_sum_samples(
    spec: &EnvironmentSpec,
    steps: u64,
    replicas: u32,
    master_seed: u64,
) -> Result<Vec<f64>, FourierError> {
    let budget = CampaignBudget {
        steps,
        replicas,
        checkpoints: vec![steps],
    };
    let result = green_partial_sums(spec, &budget, &EventThresholds::default(), master_seed)?;
    Ok(result.final_partial_sums())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    RecurrentLeaning,
    TransientLeaning,
    Inconclusive,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Evidence::RecurrentLeaning => "RecurrentLeaning",
            Evidence::TransientLeaning => "TransientLeaning",
            Evidence::Inconclusive => "Inconclusive",
        })
    }
}

/// Growth thresholds for the heuristic label. Growth is measured across the
/// final decade of checkpoints; between the two thresholds the verdict is
/// Inconclusive.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    pub recurrent_growth: f64,
    pub transient_growth: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            recurrent_growth: 0.10,
            transient_growth: 0.05,
        }
    }
}

/// Heuristic evidence report. The raw campaign curves always ride along;
/// the label is a reading aid, not a verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub evidence: Evidence,
    pub median_growth: f64,
    pub median_final: f64,
    pub growths: Vec<f64>,
    pub decade_start: u64,
    pub classify_thresholds: ClassifyThresholds,
    pub campaign: CampaignResult,
}

/// Label the campaign by the median relative growth of the partial sums over
/// the final decade of the checkpoint grid.
pub fn classify(
    spec: &EnvironmentSpec,
    budget: &CampaignBudget,
    thresholds: &EventThresholds,
    class: &ClassifyThresholds,
    master_seed: u64,
) -> Result<ClassifyReport, FourierError> {
    let campaign = green_partial_sums(spec, budget, thresholds, master_seed)?;
    let decade_start = budget
        .checkpoints
        .iter()
        .rev()
        .find(|&&c| c <= budget.steps / 10)
        .copied()
        .unwrap_or(budget.checkpoints[0]);
    let growths: Vec<f64> = campaign
        .replicas
        .iter()
        .map(|r| {
            let start = r
                .checkpoints
                .iter()
                .find(|c| c.steps == decade_start)
                .map(|c| c.partial_sum)
                .unwrap_or(r.checkpoints[0].partial_sum);
            (r.final_partial_sum() - start) / start
        })
        .collect();
    let median_growth = stats::median(&growths);
    let evidence = if median_growth > class.recurrent_growth {
        Evidence::RecurrentLeaning
    } else if median_growth < class.transient_growth {
        Evidence::TransientLeaning
    } else {
        Evidence::Inconclusive
    };
    Ok(ClassifyReport {
        evidence,
        median_growth,
        median_final: stats::median(&campaign.final_partial_sums()),
        growths,
        decade_start,
        classify_thresholds: *class,
        campaign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DefectLaw, EnvVariant, EnvironmentSpec, PeriodicPattern};
    use crate::skeleton::GeometricTable;

    fn alternating_spec() -> EnvironmentSpec {
        EnvironmentSpec::new(EnvVariant::Alternating, 0)
    }

    #[test]
    fn huge_delta1_makes_a1_certain() {
        let field = alternating_spec().field();
        let thresholds = EventThresholds::new(10.0, 0.1, 0.1);
        let freq = event_frequencies(50, &thresholds, &field, 200, 9);
        assert_eq!(freq.a1, 1.0);
    }

    #[test]
    fn event_a_increases_with_n() {
        // the complements decay, so freq(A_n) climbs with n; at desk scale
        // and delta = 0.1 the climb toward 1 is slow but monotone
        let field = alternating_spec().field();
        let thresholds = EventThresholds::default();
        let small = event_frequencies(50, &thresholds, &field, 4_000, 10);
        let mid = event_frequencies(800, &thresholds, &field, 4_000, 10);
        let large = event_frequencies(3_200, &thresholds, &field, 4_000, 10);
        assert!(mid.a > small.a, "{} vs {}", mid.a, small.a);
        assert!(large.a > mid.a, "{} vs {}", large.a, mid.a);
        // B is contained in A by construction
        assert!(small.b <= small.a && large.b <= large.a);
        // generous thresholds make the events near-certain
        let loose = EventThresholds::new(0.4, 0.4, 0.1);
        let freq = event_frequencies(800, &loose, &field, 4_000, 10);
        assert!(freq.a > 0.95, "freq(A) = {}", freq.a);
    }

    #[test]
    fn alternating_field_cancels_the_weighted_sum() {
        let alternating = alternating_spec().field();
        let iid = EnvironmentSpec::new(EnvVariant::IidUniform, 3).field();
        let thresholds = EventThresholds::default();
        let n = 200;
        let f_alt = event_frequencies(n, &thresholds, &alternating, 4_000, 11);
        let f_iid = event_frequencies(n, &thresholds, &iid, 4_000, 11);
        assert!(
            f_alt.b < f_iid.b,
            "alternating {} vs iid {}",
            f_alt.b,
            f_iid.b
        );
    }

    #[test]
    fn entropy_of_two_equal_levels_is_log_two() {
        // up-down zigzag: levels 0 and 1 visited equally over the prefix
        let trace = SkeletonTrace::from_increments(&[1, -1, 1, -1]);
        let profile = entropy_profile(&trace, 2);
        assert_eq!(profile.support, 2);
        assert!((profile.entropy - 2f64.ln()).abs() < 1e-12);
        let total: f64 = profile.pi.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounded_by_log_support_and_a1_bounds_support() {
        let thresholds = EventThresholds::default();
        for seed in 0..40u64 {
            let mut s = Stream::new(&[seed, tags::SKELETON, 5]);
            let n = 300u64;
            let trace = SkeletonTrace::simulate(2 * n, &mut s);
            let profile = entropy_profile(&trace, n);
            assert!(profile.entropy <= (profile.support as f64).ln() + 1e-12);
            let field = alternating_spec().field();
            let ind = indicators_for_trace(&trace, n, &thresholds, &field);
            if ind.a1 {
                assert!((profile.support as f64) <= 2.0 * thresholds.d1(n));
            }
        }
    }

    #[test]
    fn smoothing_point_mass_example() {
        let check = gaussian_smoothing_check(&Pmf::point(0), 2);
        assert!((check.lhs - 1.0).abs() < 1e-12);
        assert!(check.holds, "lhs {} rhs {}", check.lhs, check.rhs);
        // rhs = sqrt(2 pi e) * (Phi(1) - Phi(-1)) which exceeds 1
        let expected =
            (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt() * 0.682689492137086;
        assert!((check.rhs - expected).abs() < 1e-9);
    }

    #[test]
    fn smoothing_holds_for_random_laws() {
        let mut s = Stream::new(&[77]);
        for _ in 0..100 {
            let offset = (s.next_u64() % 41) as i64 - 20;
            let len = 1 + (s.next_u64() % 30) as usize;
            let mut probs: Vec<f64> = (0..len).map(|_| s.next_unit_f64()).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let pmf = Pmf { offset, probs };
            for d in 1..=20u64 {
                let check = gaussian_smoothing_check(&pmf, d);
                assert!(check.holds, "violated at d={d}: {check:?}");
            }
        }
    }

    #[test]
    fn conditioned_occupation_small_cases() {
        assert!((conditioned_occupation(2, 0) - 1.0).abs() < 1e-12);
        assert!((conditioned_occupation(2, 1) - 0.5).abs() < 1e-12);
        // symmetric in z
        for z in 1..=3 {
            let diff = conditioned_occupation(20, z) - conditioned_occupation(20, -z);
            assert!(diff.abs() < 1e-12);
        }
        // occupations over all levels sum to 2n
        let total: f64 = (-20..=20).map(|z| conditioned_occupation(20, z)).sum();
        assert!((total - 20.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn srw_transition_basics() {
        assert!((srw_transition(1, 1) - 0.5).abs() < 1e-12);
        assert_eq!(srw_transition(1, 0), 0.0);
        assert!((srw_transition(2, 0) - 0.5).abs() < 1e-12);
        assert!((srw_transition(4, 2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn strip_sets_cover_everything_when_l_large() {
        let mut s = Stream::new(&[21, tags::SKELETON]);
        let trace = SkeletonTrace::simulate(40_000, &mut s);
        let field = alternating_spec().field();
        let table = GeometricTable::standard(21);
        let sets = strip_decomposition(&trace, &field, &table, 2, 1_000_000, 20).unwrap();
        assert_eq!(sets.f.len(), 20);
        assert!(sets.g.is_empty());
        assert_eq!(sets.f_sum(), sets.x_at_tau[20]);
    }

    #[test]
    fn strip_sets_l_zero_puts_everything_far() {
        let mut s = Stream::new(&[22, tags::SKELETON]);
        let trace = SkeletonTrace::simulate(40_000, &mut s);
        let field = alternating_spec().field();
        let table = GeometricTable::standard(22);
        let sets = strip_decomposition(&trace, &field, &table, 2, 0, 20).unwrap();
        assert!(sets.f.len() <= 20);
        // only crossings with both endpoints at 0 can land in F, impossible
        assert_eq!(sets.f.len(), 0);
        assert_eq!(sets.g.len(), 20);
    }

    #[test]
    fn strip_decomposition_needs_enough_crossings() {
        let trace = SkeletonTrace::from_increments(&[1, -1, 1, -1]);
        let field = alternating_spec().field();
        let table = GeometricTable::standard(1);
        let err = strip_decomposition(&trace, &field, &table, 2, 1, 4).unwrap_err();
        assert!(matches!(
            err,
            DiagnosticsError::NotEnoughCrossings { needed: 4, .. }
        ));
    }

    #[test]
    fn checkpoints_are_logarithmic_and_end_at_the_horizon() {
        let grid = default_checkpoints(1_000_000);
        assert_eq!(*grid.first().unwrap(), 1000);
        assert_eq!(*grid.last().unwrap(), 1_000_000);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(grid.len() > 10 && grid.len() < 40);
        assert_eq!(default_checkpoints(500), vec![500]);
    }

    #[test]
    fn zero_return_budget_keeps_only_the_unit_term() {
        // one step cannot return, so the partial sum is exactly the n=0 term
        let budget = CampaignBudget {
            steps: 1,
            replicas: 4,
            checkpoints: vec![1],
        };
        let result = green_partial_sums(
            &alternating_spec(),
            &budget,
            &EventThresholds::default(),
            3,
        )
        .unwrap();
        for r in &result.replicas {
            assert_eq!(r.final_partial_sum(), 1.0);
            assert_eq!(r.checkpoints[0].returns, 0);
        }
    }

    #[test]
    fn campaign_is_deterministic_and_parallel_safe() {
        let budget = CampaignBudget::new(20_000, 8);
        let spec = EnvironmentSpec::new(
            EnvVariant::PeriodicWithDefects {
                pattern: PeriodicPattern::alternating(),
                law: DefectLaw::new(2.0, 1.0, 1).unwrap(),
            },
            5,
        );
        let a = green_partial_sums(&spec, &budget, &EventThresholds::default(), 13).unwrap();
        let b = green_partial_sums(&spec, &budget, &EventThresholds::default(), 13).unwrap();
        assert_eq!(a.replicas, b.replicas);
        // random variants draw a fresh environment per replica
        let seeds: std::collections::HashSet<u64> =
            a.replicas.iter().map(|r| r.env_seed).collect();
        assert!(seeds.len() > 1);
    }

    #[test]
    fn partial_sums_grow_against_skeleton_returns() {
        // each return contributes a positive probability, so partial sums
        // strictly exceed 1 once returns happen and are monotone in N
        let budget = CampaignBudget::new(30_000, 4);
        let result =
            green_partial_sums(&alternating_spec(), &budget, &EventThresholds::default(), 7)
                .unwrap();
        for r in &result.replicas {
            let sums: Vec<f64> = r.checkpoints.iter().map(|c| c.partial_sum).collect();
            assert!(sums.windows(2).all(|w| w[1] >= w[0]));
            assert!(r.final_partial_sum() > 1.0);
        }
    }

    #[test]
    fn classifier_separates_alternating_from_iid() {
        let budget = CampaignBudget::new(200_000, 12);
        let thresholds = EventThresholds::default();
        let class = ClassifyThresholds::default();
        let recurrent = classify(&alternating_spec(), &budget, &thresholds, &class, 17).unwrap();
        let transient = classify(
            &EnvironmentSpec::new(EnvVariant::IidUniform, 17),
            &budget,
            &thresholds,
            &class,
            17,
        )
        .unwrap();
        assert_eq!(recurrent.evidence, Evidence::RecurrentLeaning);
        assert_eq!(transient.evidence, Evidence::TransientLeaning);
        assert!(recurrent.median_growth > transient.median_growth);
    }
}
