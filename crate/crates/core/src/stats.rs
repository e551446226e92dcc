//! Small statistical test helpers used by the verifiers and campaigns.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Sample mean and standard error.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    assert!(n >= 1.0);
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of observed counts against expected
/// probabilities. Cells with negligible expectation are pooled into their
/// neighbour to keep the asymptotics valid.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    for (&obs, &prob) in observed.iter().zip(expected_probs) {
        let exp = prob * n as f64;
        match cells.last_mut() {
            Some(last) if last.1 < 5.0 => {
                last.0 += obs as f64;
                last.1 += exp;
            }
            _ => cells.push((obs as f64, exp)),
        }
    }
    // pool a trailing thin cell backwards
    if cells.len() >= 2 && cells.last().unwrap().1 < 5.0 {
        let (o, e) = cells.pop().unwrap();
        let last = cells.last_mut().unwrap();
        last.0 += o;
        last.1 += e;
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(statistic);
    ChiSquareResult {
        statistic,
        dof,
        p_value,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|u, v| u.total_cmp(v));
    xb.sort_by(|u, v| u.total_cmp(v));
    let (na, nb) = (xa.len(), xb.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: ks_survival(lambda),
    }
}

/// Kolmogorov distribution survival function Q(lambda).
fn ks_survival(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn mean_and_se_basics() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-12);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((median(&[3.0, 1.0, 2.0]) - 2.0).abs() < 1e-12);
        assert!((median(&[4.0, 1.0, 2.0, 3.0]) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn chi_square_accepts_the_true_law() {
        let mut s = Stream::new(&[31]);
        let mut counts = vec![0u64; 12];
        let n = 100_000;
        for _ in 0..n {
            let k = s.next_geometric(1.0 / 3.0) as usize;
            counts[k.min(11)] += 1;
        }
        let mut probs: Vec<f64> = (0..11).map(|k| (2.0 / 3.0) * (1.0f64 / 3.0).powi(k)).collect();
        probs.push(1.0 - probs.iter().sum::<f64>());
        let res = chi_square_gof(&counts, &probs);
        assert!(res.p_value > 0.001, "p = {}", res.p_value);
    }

    #[test]
    fn chi_square_rejects_a_wrong_law() {
        let counts = [9000u64, 500, 500];
        let probs = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let res = chi_square_gof(&counts, &probs);
        assert!(res.p_value < 1e-6);
    }

    #[test]
    fn ks_accepts_same_distribution_and_rejects_shift() {
        let mut s = Stream::new(&[32]);
        let a: Vec<f64> = (0..4000).map(|_| s.next_unit_f64()).collect();
        let b: Vec<f64> = (0..4000).map(|_| s.next_unit_f64()).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.001);
        let c: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
    }
}
