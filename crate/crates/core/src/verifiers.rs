//! Registry of semi-analytic verifiers: each checks one exact identity or
//! distributional law of the decomposition against an independent oracle and
//! reports a pass/fail outcome with measured statistics.

use std::collections::HashMap;

use crate::diagnostics::{
    conditioned_occupation, gaussian_smoothing_check, strip_decomposition,
};
use crate::env::{EnvVariant, EnvironmentSpec};
use crate::fourier::{
    exact_return_prob, quenched_return_prob, CharFnParams, Pmf, QuenchedLaw,
    DEFAULT_SUPPORT_BUDGET,
};
use crate::rng::{tags, Stream};
use crate::skeleton::{
    couple_and_check, check_coupling, crossing_times, reflect_crossing, residue_counts,
    simulate_coupled, CorruptedTable, GeometricTable, SkeletonTrace, WaitingTimes,
};
use crate::stats;

/// Result of one verifier: a name, a verdict, and a human-readable summary
/// of the measured statistics.
#[derive(Debug, Clone)]
pub struct VerifierOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl VerifierOutcome {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, pass, detail }
    }
}

pub const VERIFIER_NAMES: [&str; 8] = [
    "waiting_time_law",
    "coupling",
    "oracle_equivalence",
    "residue_law",
    "reflection",
    "conditioned_occupation",
    "gaussian_smoothing",
    "strip_decomposition",
];

/// Run the selected verifiers (all when `only` is empty). `inject_fault`
/// corrupts the waiting-time keying, a negative control that must break the
/// coupling verifier.
pub fn run_verifiers(seed: u64, only: &[String], inject_fault: bool) -> Vec<VerifierOutcome> {
    let selected = |name: &str| only.is_empty() || only.iter().any(|o| o == name);
    let mut outcomes = Vec::new();
    if selected("waiting_time_law") {
        outcomes.push(waiting_time_law(seed));
    }
    if selected("coupling") {
        outcomes.push(coupling(seed, inject_fault));
    }
    if selected("oracle_equivalence") {
        outcomes.push(oracle_equivalence(seed));
    }
    if selected("residue_law") {
        outcomes.push(residue_law(seed));
    }
    if selected("reflection") {
        outcomes.push(reflection());
    }
    if selected("conditioned_occupation") {
        outcomes.push(conditioned_occupation_check(seed));
    }
    if selected("gaussian_smoothing") {
        outcomes.push(gaussian_smoothing(seed));
    }
    if selected("strip_decomposition") {
        outcomes.push(strip_centring(seed));
    }
    outcomes
}

/// 10^6 keyed waiting-time draws against the geometric law with p = 1/3:
/// chi-square goodness of fit and a 1% check of the mean 1/2.
pub fn waiting_time_law(seed: u64) -> VerifierOutcome {
    let table = GeometricTable::standard(seed);
    let n = 1_000_000u64;
    let levels = 1000i64;
    let visits = n / (2 * levels as u64);
    let mut counts = vec![0u64; 16];
    let mut total = 0u64;
    let mut drawn = 0u64;
    for y in -levels..levels {
        for visit in 1..=visits {
            let xi = table.xi(y, visit);
            counts[(xi as usize).min(15)] += 1;
            total += xi;
            drawn += 1;
        }
    }
    let p = 1.0f64 / 3.0;
    let mut probs: Vec<f64> = (0..15).map(|k| (1.0 - p) * p.powi(k)).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let gof = stats::chi_square_gof(&counts, &probs);
    let mean = total as f64 / drawn as f64;
    let mean_ok = (mean - 0.5).abs() <= 0.005;
    let pass = gof.p_value > 0.001 && mean_ok;
    VerifierOutcome::new(
        "waiting_time_law",
        pass,
        format!(
            "{drawn} draws, mean {mean:.5} (target 0.5 +- 1%), chi2 p = {:.4}",
            gof.p_value
        ),
    )
}

/// Coupling identity M_(T_m) = (X_m, Y_m) exactly, 100 seeds x 10^4 vertical
/// moves. Fault injection shifts the waiting-time keys and must break it.
pub fn coupling(seed: u64, inject_fault: bool) -> VerifierOutcome {
    let field = EnvironmentSpec::new(EnvVariant::Alternating, 0).field();
    let mut failures = 0u32;
    let runs = 100u64;
    for k in 0..runs {
        let s = seed.wrapping_add(k);
        let ok = if inject_fault {
            // the run is generated with the corrupted table but validated
            // against the honest one, so the identity must break
            let table = CorruptedTable(GeometricTable::standard(s));
            let mut skel = Stream::new(&[s, tags::SKELETON]);
            let run = simulate_coupled(10_000, &field, &table, &mut skel);
            check_coupling(&run, &field, &GeometricTable::standard(s))
        } else {
            couple_and_check(10_000, &field, s)
        };
        failures += !ok as u32;
    }
    VerifierOutcome::new(
        "coupling",
        failures == 0,
        format!(
            "{runs} runs x 10^4 vertical moves, {failures} failures{}",
            if inject_fault { " (fault injected)" } else { "" }
        ),
    )
}

fn random_law(stream: &mut Stream, max_levels: u64, max_total: u64) -> QuenchedLaw {
    let levels = 1 + stream.next_u64() % max_levels;
    let mut factors = Vec::new();
    let mut remaining = max_total;
    for _ in 0..levels {
        if remaining == 0 {
            break;
        }
        let count = 1 + stream.next_u64() % remaining.min(max_total / levels + 1);
        factors.push((stream.next_sign(), count));
        remaining -= count;
    }
    QuenchedLaw::new(factors).expect("valid signs")
}

fn sample_embedded(stream: &mut Stream, law: &QuenchedLaw, p: f64) -> i64 {
    let mut x = 0i64;
    for &(sign, count) in law.factors() {
        for _ in 0..count {
            x += sign as i64 * stream.next_geometric(p) as i64;
        }
    }
    x
}

/// Fourier inversion against the exact convolution on small laws, and
/// against Monte Carlo on larger ones.
pub fn oracle_equivalence(seed: u64) -> VerifierOutcome {
    let params = CharFnParams::default();
    let mut stream = Stream::new(&[seed, tags::RESAMPLE, 1]);
    let mut max_err = 0f64;
    for _ in 0..20 {
        let law = random_law(&mut stream, 4, 12);
        let fourier = quenched_return_prob(&params, &law).expect("quadrature");
        let exact = exact_return_prob(&params, &law, DEFAULT_SUPPORT_BUDGET).expect("budget");
        max_err = max_err.max((fourier - exact).abs());
    }
    let exact_ok = max_err <= 1e-8;

    let mut max_sigma = 0f64;
    let samples = 100_000u64;
    for _ in 0..5 {
        // balanced signs keep P(X = 0) macroscopic so Monte Carlo resolves it
        let pairs = 1 + stream.next_u64() % 4;
        let mut factors = Vec::new();
        for _ in 0..pairs {
            factors.push((1i8, 3 + stream.next_u64() % 6));
            factors.push((-1i8, 3 + stream.next_u64() % 6));
        }
        let law = QuenchedLaw::new(factors).expect("valid signs");
        let fourier = quenched_return_prob(&params, &law).expect("quadrature");
        let mut hits = 0u64;
        for _ in 0..samples {
            hits += (sample_embedded(&mut stream, &law, params.p()) == 0) as u64;
        }
        let p_hat = hits as f64 / samples as f64;
        let se = (p_hat * (1.0 - p_hat) / samples as f64).sqrt().max(1e-12);
        max_sigma = max_sigma.max((fourier - p_hat).abs() / se);
    }
    let mc_ok = max_sigma <= 4.0;
    VerifierOutcome::new(
        "oracle_equivalence",
        exact_ok && mc_ok,
        format!(
            "max |fourier - exact| = {max_err:.2e} (<= 1e-8); max MC deviation {max_sigma:.2} SE (<= 4)"
        ),
    )
}

/// Residue occupation of the first crossing: for Q = 2 and Q = 4 the mean
/// N_1 per residue is E_0[tau_1]/Q = Q, and the up/down-conditioned samples
/// share one distribution (two-sample KS).
pub fn residue_law(seed: u64) -> VerifierOutcome {
    let mut detail = String::new();
    let mut pass = true;
    for q in [2i64, 4] {
        let target_crossings = 100_000usize;
        // one long trace holds them all: E_0[tau_1] = Q^2 steps per crossing
        let steps = (target_crossings as u64) * (q * q) as u64 * 3 / 2;
        let mut stream = Stream::new(&[seed, tags::SKELETON, q as u64]);
        let trace = SkeletonTrace::simulate(steps, &mut stream);
        let times = crossing_times(&trace, q).expect("valid width");
        let crossings = times.crossings().min(target_crossings);
        let mut up: Vec<Vec<f64>> = vec![Vec::new(); q as usize];
        let mut down: Vec<Vec<f64>> = vec![Vec::new(); q as usize];
        let mut sums = vec![0f64; q as usize];
        for k in 1..=crossings {
            let counts = residue_counts(&trace, &times, k);
            let went_up = times.z[k] > times.z[k - 1];
            for (r, &c) in counts.iter().enumerate() {
                sums[r] += c as f64;
                if went_up {
                    up[r].push(c as f64);
                } else {
                    down[r].push(c as f64);
                }
            }
        }
        let mut worst_rel = 0f64;
        let mut worst_p = 1f64;
        for r in 0..q as usize {
            let mean = sums[r] / crossings as f64;
            worst_rel = worst_rel.max((mean - q as f64).abs() / q as f64);
            let ks = stats::ks_two_sample(&up[r], &down[r]);
            worst_p = worst_p.min(ks.p_value);
        }
        pass &= worst_rel <= 0.02 && worst_p > 0.001;
        detail.push_str(&format!(
            "Q={q}: {crossings} crossings, worst mean deviation {:.3}% (<= 2%), worst KS p = {worst_p:.4}; ",
            100.0 * worst_rel
        ));
    }
    VerifierOutcome::new("residue_law", pass, detail)
}

fn enumerate_first_crossings(q: i64, max_len: usize) -> Vec<Vec<i64>> {
    let mut paths = Vec::new();
    let mut stack = vec![vec![0i64]];
    while let Some(path) = stack.pop() {
        let y = *path.last().unwrap();
        for step in [1i64, -1] {
            let next = y + step;
            let mut p = path.clone();
            p.push(next);
            if next.abs() == q {
                paths.push(p);
            } else if p.len() <= max_len {
                stack.push(p);
            }
        }
    }
    paths
}

/// Exhaustive check that the modified reflection is a residue-preserving
/// bijection between up-exits and down-exits, over all first-crossing paths
/// with tau_1 <= 14 at Q = 2.
pub fn reflection() -> VerifierOutcome {
    let q = 2i64;
    let paths = enumerate_first_crossings(q, 14);
    let mut up = 0usize;
    let mut down = 0usize;
    let mut images = std::collections::HashSet::new();
    let mut failures = 0usize;
    for path in &paths {
        if *path.last().unwrap() == q {
            up += 1;
            let image = match reflect_crossing(path, q) {
                Ok(v) => v,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            let ok_exit = *image.last().unwrap() == -q
                && image[..image.len() - 1].iter().all(|y| y.abs() < q);
            let involutive = reflect_crossing(&image, q).as_deref() == Ok(path.as_slice());
            let residues_match = residue_occupation(path, q) == residue_occupation(&image, q);
            if !(ok_exit && involutive && residues_match && images.insert(image)) {
                failures += 1;
            }
        } else {
            down += 1;
        }
    }
    let pass = failures == 0 && up == down && images.len() == up;
    VerifierOutcome::new(
        "reflection",
        pass,
        format!(
            "{} first-crossing paths (tau_1 <= 14, Q=2): {up} up / {down} down, {} distinct images, {failures} failures",
            paths.len(),
            images.len()
        ),
    )
}

fn residue_occupation(path: &[i64], q: i64) -> Vec<u64> {
    let mut counts = vec![0u64; q as usize];
    for &y in &path[..path.len() - 1] {
        counts[y.rem_euclid(q) as usize] += 1;
    }
    counts
}

/// Exact conditioned-occupation formula against rejection-sampled bridges at
/// 2n = 20, plus the closed 2n = 2 values.
pub fn conditioned_occupation_check(seed: u64) -> VerifierOutcome {
    let small_ok = (conditioned_occupation(2, 0) - 1.0).abs() < 1e-12
        && (conditioned_occupation(2, 1) - 0.5).abs() < 1e-12;
    let two_n = 20u64;
    let mut stream = Stream::new(&[seed, tags::RESAMPLE, 2]);
    let attempts = 400_000u32;
    let mut bridges = 0u32;
    let mut occ: HashMap<i64, Vec<f64>> = (-3..=3).map(|z| (z, Vec::new())).collect();
    for _ in 0..attempts {
        let mut y = 0i64;
        let mut counts: HashMap<i64, u32> = HashMap::new();
        for _ in 0..two_n {
            y += stream.next_sign() as i64;
            *counts.entry(y).or_insert(0) += 1;
        }
        if y != 0 {
            continue;
        }
        bridges += 1;
        for (&z, samples) in occ.iter_mut() {
            samples.push(counts.get(&z).copied().unwrap_or(0) as f64);
        }
    }
    let mut max_sigma = 0f64;
    for (&z, samples) in &occ {
        let (mean, se) = stats::mean_and_se(samples);
        let exact = conditioned_occupation(two_n, z);
        max_sigma = max_sigma.max((mean - exact).abs() / se.max(1e-12));
    }
    let pass = small_ok && max_sigma <= 3.0;
    VerifierOutcome::new(
        "conditioned_occupation",
        pass,
        format!(
            "2n=2 closed values {}; {bridges} bridges at 2n=20, max deviation {max_sigma:.2} SE (<= 3)",
            if small_ok { "exact" } else { "WRONG" }
        ),
    )
}

/// The smoothing inequality over 100 random integer laws and d = 1..20.
pub fn gaussian_smoothing(seed: u64) -> VerifierOutcome {
    let mut stream = Stream::new(&[seed, tags::RESAMPLE, 3]);
    let mut violations = 0u32;
    let mut checks = 0u32;
    let mut min_margin = f64::INFINITY;
    for _ in 0..100 {
        let offset = (stream.next_u64() % 81) as i64 - 40;
        let len = 1 + (stream.next_u64() % 40) as usize;
        let mut probs: Vec<f64> = (0..len).map(|_| stream.next_unit_f64()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let pmf = Pmf { offset, probs };
        for d in 1..=20 {
            let check = gaussian_smoothing_check(&pmf, d);
            checks += 1;
            violations += !check.holds as u32;
            min_margin = min_margin.min(check.rhs - check.lhs);
        }
    }
    VerifierOutcome::new(
        "gaussian_smoothing",
        violations == 0,
        format!("{checks} checks, {violations} violations, min margin {min_margin:.4}"),
    )
}

/// Exact strip-decomposition identity plus the centring of far-strip
/// crossing increments for the defect-free alternating field.
pub fn strip_centring(seed: u64) -> VerifierOutcome {
    let field = EnvironmentSpec::new(EnvVariant::Alternating, 0).field();
    let table = GeometricTable::standard(seed);
    let q = 2i64;
    let l = 2i64;
    let mut far_thetas: Vec<f64> = Vec::new();
    let mut total_crossings = 0usize;
    for rep in 0..4u64 {
        let mut stream = Stream::new(&[seed, tags::SKELETON, 4, rep]);
        let trace = SkeletonTrace::simulate(1_000_000, &mut stream);
        let crossings = crossing_times(&trace, q).expect("valid width").crossings();
        let two_n = crossings - crossings % 2;
        // strip_decomposition asserts the exact telescoping identity
        let sets = match strip_decomposition(&trace, &field, &table, q, l, two_n) {
            Ok(s) => s,
            Err(e) => {
                return VerifierOutcome::new("strip_decomposition", false, format!("{e}"));
            }
        };
        total_crossings += two_n;
        far_thetas.extend(sets.g.iter().map(|&k| sets.theta[k] as f64));
    }
    let (mean, se) = stats::mean_and_se(&far_thetas);
    let sigma = mean.abs() / se.max(1e-12);
    VerifierOutcome::new(
        "strip_decomposition",
        sigma <= 4.0,
        format!(
            "{total_crossings} crossings, {} far-strip increments, mean theta {mean:.4} = {sigma:.2} SE (<= 4)",
            far_thetas.len()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_verifier_passes() {
        let outcome = reflection();
        assert!(outcome.pass, "{}", outcome.detail);
    }

    #[test]
    fn fault_injection_breaks_coupling() {
        let honest = coupling(5, false);
        assert!(honest.pass, "{}", honest.detail);
        let faulty = coupling(5, true);
        assert!(!faulty.pass, "{}", faulty.detail);
        assert!(faulty.detail.contains("100 failures"), "{}", faulty.detail);
    }

    #[test]
    fn selection_runs_only_named_verifiers() {
        let outcomes = run_verifiers(1, &["reflection".into()], false);
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].name, "reflection");
    }

    #[test]
    fn smoothing_verifier_passes() {
        let outcome = gaussian_smoothing(2);
        assert!(outcome.pass, "{}", outcome.detail);
    }
}
