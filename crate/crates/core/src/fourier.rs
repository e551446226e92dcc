//! Quenched return-probability oracles.
//!
//! Conditionally on the skeleton and the environment, the embedded
//! horizontal position is a sum of signed geometric variables, one per
//! visit, and its characteristic function is a product of geometric
//! characteristic-function factors. Two independent routes evaluate the
//! point mass at 0: Fourier inversion by periodic trapezoid quadrature, and
//! exact convolution of the signed geometric laws. The Fourier route scales
//! to millions of factors because the product collapses to
//! `r(theta)^n * exp(i alpha(theta) S)` with `n` the total occupation and
//! `S` the signed occupation.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::env::OrientationField;

#[derive(Debug, Error, PartialEq)]
pub enum FourierError {
    #[error("parameter p must be in (0, 1), got {0}")]
    BadParameter(f64),
    #[error("quadrature did not converge below {tol} within {max_nodes} nodes (residual {residual})")]
    QuadratureNotConverged {
        tol: f64,
        max_nodes: usize,
        residual: f64,
    },
    #[error("convolution support budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("law factors must carry signs in {{-1,+1}}, got {0}")]
    BadSign(i8),
}

/// Geometric waiting-time parameter; P(xi = k) = q p^k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFnParams {
    p: f64,
}

impl Default for CharFnParams {
    fn default() -> Self {
        Self { p: 1.0 / 3.0 }
    }
}

impl CharFnParams {
    pub fn new(p: f64) -> Result<Self, FourierError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(FourierError::BadParameter(p));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// chi(theta) = q / (1 - p e^{i theta}).
    pub fn chi(&self, theta: f64) -> Complex64 {
        Complex64::new(self.q(), 0.0)
            / (Complex64::new(1.0, 0.0) - self.p * Complex64::from_polar(1.0, theta))
    }

    /// Modulus r(theta) = q / sqrt(q^2 + 2p(1 - cos theta)); even in theta.
    pub fn r(&self, theta: f64) -> f64 {
        let q = self.q();
        q / (q * q + 2.0 * self.p * (1.0 - theta.cos())).sqrt()
    }

    /// Phase alpha(theta) = arctan(p sin theta / (1 - p cos theta)); odd in theta.
    pub fn alpha(&self, theta: f64) -> f64 {
        (self.p * theta.sin()).atan2(1.0 - self.p * theta.cos())
    }
}

/// Conditional law data: the pairs `(epsilon_y, eta(y))` over the support of
/// a skeleton occupation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuenchedLaw {
    factors: Vec<(i8, u64)>,
}

impl QuenchedLaw {
    pub fn new(factors: Vec<(i8, u64)>) -> Result<Self, FourierError> {
        if let Some(&(s, _)) = factors.iter().find(|&&(s, _)| s != 1 && s != -1) {
            return Err(FourierError::BadSign(s));
        }
        Ok(Self { factors })
    }

    pub fn empty() -> Self {
        Self { factors: vec![] }
    }

    /// Pair the occupation map of a skeleton prefix with the environment.
    pub fn from_occupation(eta: &HashMap<i64, u64>, field: &OrientationField) -> Self {
        let mut factors: Vec<(i8, u64)> = eta
            .iter()
            .map(|(&y, &count)| (field.orientation_at(y), count))
            .collect();
        factors.sort_unstable();
        Self { factors }
    }

    pub fn factors(&self) -> &[(i8, u64)] {
        &self.factors
    }

    /// n = sum of eta(y).
    pub fn total(&self) -> u64 {
        self.factors.iter().map(|&(_, c)| c).sum()
    }

    /// S = sum of epsilon_y eta(y).
    pub fn signed_total(&self) -> i64 {
        self.factors
            .iter()
            .map(|&(s, c)| s as i64 * c as i64)
            .sum()
    }
}

/// Product of chi(theta epsilon_y)^eta(y), computed in log-polar form.
pub fn quenched_cf(params: &CharFnParams, theta: f64, law: &QuenchedLaw) -> Complex64 {
    let n = law.total() as f64;
    let s = law.signed_total() as f64;
    let modulus = (n * params.r(theta).ln()).exp();
    Complex64::from_polar(modulus, s * params.alpha(theta))
}

const BASE_NODES: usize = 256;
const MAX_NODES: usize = 1 << 21;
const QUADRATURE_TOL: f64 = 1e-10;

struct Grid {
    nodes: usize,
    ln_r: Vec<f64>,
    alpha: Vec<f64>,
}

impl Grid {
    fn build(params: &CharFnParams, nodes: usize) -> Self {
        let mut ln_r = Vec::with_capacity(nodes);
        let mut alpha = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let theta = -std::f64::consts::PI
                + 2.0 * std::f64::consts::PI * j as f64 / nodes as f64;
            ln_r.push(params.r(theta).ln());
            alpha.push(params.alpha(theta));
        }
        Self { nodes, ln_r, alpha }
    }

    /// (1/2pi) integral of r^n cos(alpha s) by the periodic trapezoid rule.
    /// r is maximal at theta = 0 and decreases monotonically in |theta|, so
    /// for large n the damping confines the integrand to a narrow window
    /// around the center node; nodes whose factor falls below exp(-45) are
    /// skipped, which keeps the cost of huge grids proportional to the
    /// window rather than the grid.
    fn invert(&self, n: f64, s: f64) -> f64 {
        let cutoff = -45.0 / n.max(1.0);
        let center = self.nodes / 2;
        let mut acc = 0.0;
        for j in center..self.nodes {
            if self.ln_r[j] < cutoff {
                break;
            }
            acc += (n * self.ln_r[j]).exp() * (s * self.alpha[j]).cos();
        }
        for j in (0..center).rev() {
            if self.ln_r[j] < cutoff {
                break;
            }
            acc += (n * self.ln_r[j]).exp() * (s * self.alpha[j]).cos();
        }
        acc / self.nodes as f64
    }
}

/// Fourier oracle with cached quadrature grids. The integrand is analytic
/// and 2pi-periodic, so the periodic trapezoid rule converges spectrally;
/// nodes are doubled until two successive estimates agree below tolerance.
pub struct ReturnProbEvaluator {
    params: CharFnParams,
    grids: Vec<Grid>,
}

impl ReturnProbEvaluator {
    pub fn new(params: CharFnParams) -> Self {
        Self {
            params,
            grids: Vec::new(),
        }
    }

    fn grid(&mut self, level: usize) -> &Grid {
        while self.grids.len() <= level {
            let nodes = BASE_NODES << self.grids.len();
            self.grids.push(Grid::build(&self.params, nodes));
        }
        &self.grids[level]
    }

    fn invert_adaptive(&mut self, n: f64, s: f64) -> Result<f64, FourierError> {
        let mut prev = self.grid(0).invert(n, s);
        let mut level = 1;
        loop {
            let nodes = BASE_NODES << level;
            if nodes > MAX_NODES {
                return Err(FourierError::QuadratureNotConverged {
                    tol: QUADRATURE_TOL,
                    max_nodes: MAX_NODES,
                    residual: f64::NAN,
                });
            }
            let cur = self.grid(level).invert(n, s);
            if (cur - prev).abs() < QUADRATURE_TOL {
                return Ok(cur.clamp(0.0, 1.0));
            }
            prev = cur;
            level += 1;
        }
    }

    /// P(X = 0) for the summarised law (total occupation n, signed occupation s).
    pub fn return_prob_summary(&mut self, n: u64, s: i64) -> Result<f64, FourierError> {
        self.invert_adaptive(n as f64, s as f64)
    }

    /// P(X = 0) for a full law.
    pub fn return_prob(&mut self, law: &QuenchedLaw) -> Result<f64, FourierError> {
        self.return_prob_summary(law.total(), law.signed_total())
    }

    /// P(I(X, eps0 xi0) contains 0) with xi0 an independent geometric: the
    /// interval indicator has the geometric characteristic function as its
    /// Fourier multiplier, so this is the inversion with one extra factor of
    /// sign eps0, divided by q.
    pub fn interval_hit_summary(&mut self, n: u64, s: i64, eps0: i8) -> Result<f64, FourierError> {
        debug_assert!(eps0 == 1 || eps0 == -1);
        let raw = self.invert_adaptive(n as f64 + 1.0, (s + eps0 as i64) as f64)?;
        Ok((raw / self.params.q()).clamp(0.0, 1.0))
    }
}

/// One-shot Fourier inversion of the quenched return probability.
pub fn quenched_return_prob(params: &CharFnParams, law: &QuenchedLaw) -> Result<f64, FourierError> {
    ReturnProbEvaluator::new(*params).return_prob(law)
}

const TAIL_MASS: f64 = 1e-14;
pub const DEFAULT_SUPPORT_BUDGET: usize = 1 << 14;

/// Finite probability mass function on a contiguous integer support.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    pub offset: i64,
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn point(x: i64) -> Self {
        Self {
            offset: x,
            probs: vec![1.0],
        }
    }

    pub fn prob_at(&self, x: i64) -> f64 {
        let i = x - self.offset;
        if i < 0 || i as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn convolve(&self, other: &Pmf, budget: usize) -> Result<Pmf, FourierError> {
        let len = self.probs.len() + other.probs.len() - 1;
        if len > budget {
            return Err(FourierError::BudgetExceeded {
                needed: len,
                budget,
            });
        }
        let mut probs = vec![0.0; len];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                probs[i + j] += a * b;
            }
        }
        Ok(Pmf {
            offset: self.offset + other.offset,
            probs,
        })
    }
}

/// Negative binomial: sum of `count` geometric variables, signed by `sign`,
/// with tails truncated once the residual mass drops below 1e-14.
fn signed_negative_binomial(params: &CharFnParams, sign: i8, count: u64) -> Pmf {
    if count == 0 {
        return Pmf::point(0);
    }
    let (p, q) = (params.p(), params.q());
    let mut probs = vec![q.powf(count as f64)];
    let mut cumulative = probs[0];
    let mut k = 0u64;
    while 1.0 - cumulative > TAIL_MASS {
        let last = *probs.last().unwrap();
        let next = last * p * (k + count) as f64 / (k + 1) as f64;
        probs.push(next);
        cumulative += next;
        k += 1;
    }
    if sign == 1 {
        Pmf { offset: 0, probs }
    } else {
        probs.reverse();
        Pmf {
            offset: -(probs.len() as i64 - 1),
            probs,
        }
    }
}

/// Exact distribution of X = sum over levels of epsilon_y * (sum of eta(y)
/// geometric variables), via repeated convolution.
pub fn exact_distribution(
    params: &CharFnParams,
    law: &QuenchedLaw,
    budget: usize,
) -> Result<Pmf, FourierError> {
    let mut pmf = Pmf::point(0);
    for &(sign, count) in law.factors() {
        pmf = pmf.convolve(&signed_negative_binomial(params, sign, count), budget)?;
    }
    Ok(pmf)
}

/// Exact P(X = 0) by convolution; the independent oracle for the Fourier route.
pub fn exact_return_prob(
    params: &CharFnParams,
    law: &QuenchedLaw,
    budget: usize,
) -> Result<f64, FourierError> {
    Ok(exact_distribution(params, law, budget)?.prob_at(0))
}

/// P(I(X, eps0 xi0) contains 0) for a known distribution of X, with xi0 an
/// independent geometric. For eps0 = +1 the interval is {X, ..., X + xi0},
/// so the hit requires X <= 0 and xi0 >= -X.
pub fn interval_hit_from_pmf(params: &CharFnParams, pmf: &Pmf, eps0: i8) -> f64 {
    debug_assert!(eps0 == 1 || eps0 == -1);
    let p = params.p();
    let mut acc = 0.0;
    for (i, &mass) in pmf.probs.iter().enumerate() {
        let x = pmf.offset + i as i64;
        let hit = if eps0 == 1 { x <= 0 } else { x >= 0 };
        if hit {
            acc += mass * p.powi(x.unsigned_abs() as i32);
        }
    }
    acc
}

/// Exact-route interval hit probability.
pub fn interval_hit_prob(
    params: &CharFnParams,
    law: &QuenchedLaw,
    eps0: i8,
    budget: usize,
) -> Result<f64, FourierError> {
    let pmf = exact_distribution(params, law, budget)?;
    Ok(interval_hit_from_pmf(params, &pmf, eps0))
}
