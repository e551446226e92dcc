//! Keyed counter-based randomness.
//!
//! Every random quantity in the toolkit is a pure function of a key built
//! from `(seed, purpose tag, coordinates...)`. Orientations, defect
//! indicators and waiting times can therefore be queried lazily, in any
//! order and from any thread, without storing an infinite environment.
//! Sequential consumers (the vertical skeleton, walk steps) use a
//! [`Stream`], which is the same construction with an incrementing counter.
//!
//! The mixer is the splitmix64 finalizer; it is fast, stable across
//! platforms and has full avalanche. Not cryptographic.

/// Purpose tags keeping unrelated random decisions on disjoint keys.
pub mod tags {
    /// Defect indicator lambda_y.
    pub const LAMBDA: u64 = 0x01;
    /// Defect orientation rho_y.
    pub const RHO: u64 = 0x02;
    /// I.i.d. uniform orientation epsilon_y.
    pub const EPSILON: u64 = 0x03;
    /// Vertical skeleton increments.
    pub const SKELETON: u64 = 0x04;
    /// Waiting times xi_i^(y).
    pub const XI: u64 = 0x05;
    /// Raw walk step decisions.
    pub const WALK: u64 = 0x06;
    /// Per-replica stream derivation.
    pub const REPLICA: u64 = 0x07;
    /// Per-replica environment seed derivation.
    pub const ENV: u64 = 0x08;
    /// Waiting-time resampling streams.
    pub const RESAMPLE: u64 = 0x09;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse key parts into a single 64-bit key.
#[inline]
pub fn derive_key(parts: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &p in parts {
        h = splitmix(h.wrapping_add(GOLDEN) ^ p);
    }
    h
}

/// One-shot uniform 64-bit value for a keyed decision.
#[inline]
pub fn value_at(parts: &[u64]) -> u64 {
    splitmix(derive_key(parts).wrapping_add(GOLDEN))
}

#[inline]
pub fn u64_to_unit_f64(x: u64) -> f64 {
    // 53 high bits, uniform in [0, 1)
    (x >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Keyed one-shot Bernoulli with success probability `p`.
#[inline]
pub fn bernoulli_at(parts: &[u64], p: f64) -> bool {
    u64_to_unit_f64(value_at(parts)) < p
}

/// Keyed one-shot uniform sign.
#[inline]
pub fn sign_at(parts: &[u64]) -> i8 {
    if value_at(parts) >> 63 == 0 {
        1
    } else {
        -1
    }
}

/// Keyed one-shot geometric value with P(k) = (1-p) p^k.
#[inline]
pub fn geometric_at(parts: &[u64], p: f64) -> u64 {
    geometric_from_u64(value_at(parts), p)
}

#[inline]
pub fn geometric_from_u64(x: u64, p: f64) -> u64 {
    debug_assert!(p > 0.0 && p < 1.0);
    // inversion: k = floor(ln(1-U) / ln p), with 1-U in (0, 1]
    let u = 1.0 - u64_to_unit_f64(x);
    (u.ln() / p.ln()).floor() as u64
}

/// Counter-based stream for sequential consumers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(parts: &[u64]) -> Self {
        Self {
            key: derive_key(parts),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = splitmix(self.key ^ splitmix(self.counter.wrapping_add(GOLDEN)));
        self.counter += 1;
        v
    }

    #[inline]
    pub fn next_unit_f64(&mut self) -> f64 {
        u64_to_unit_f64(self.next_u64())
    }

    /// Uniform sign in {-1, +1}.
    #[inline]
    pub fn next_sign(&mut self) -> i8 {
        if self.next_u64() >> 63 == 0 {
            1
        } else {
            -1
        }
    }

    /// Uniform index in {0, 1, 2} (widening-multiply range reduction).
    #[inline]
    pub fn next_of_three(&mut self) -> usize {
        ((self.next_u64() as u128 * 3) >> 64) as usize
    }

    /// Geometric value with P(k) = (1-p) p^k.
    #[inline]
    pub fn next_geometric(&mut self, p: f64) -> u64 {
        geometric_from_u64(self.next_u64(), p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_values_are_pure() {
        let a = value_at(&[42, tags::LAMBDA, 7]);
        let b = value_at(&[42, tags::LAMBDA, 7]);
        assert_eq!(a, b);
        assert_ne!(a, value_at(&[42, tags::RHO, 7]));
        assert_ne!(a, value_at(&[42, tags::LAMBDA, 8]));
        assert_ne!(a, value_at(&[43, tags::LAMBDA, 7]));
    }

    #[test]
    fn stream_is_reproducible_and_order_independent_of_clone() {
        let mut s1 = Stream::new(&[1, 2, 3]);
        let mut s2 = s1.clone();
        let v1: Vec<u64> = (0..100).map(|_| s1.next_u64()).collect();
        let v2: Vec<u64> = (0..100).map(|_| s2.next_u64()).collect();
        assert_eq!(v1, v2);
    }

    #[test]
    fn three_way_is_roughly_uniform() {
        let mut s = Stream::new(&[9]);
        let mut counts = [0u64; 3];
        let n = 300_000;
        for _ in 0..n {
            counts[s.next_of_three()] += 1;
        }
        let expected = n as f64 / 3.0;
        let sd = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for &c in &counts {
            assert!((c as f64 - expected).abs() < 4.0 * sd, "counts {counts:?}");
        }
    }

    #[test]
    fn geometric_matches_mean() {
        let mut s = Stream::new(&[5]);
        let n = 200_000;
        let sum: u64 = (0..n).map(|_| s.next_geometric(1.0 / 3.0)).sum();
        let mean = sum as f64 / n as f64;
        // E = p/q = 1/2
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }
}
