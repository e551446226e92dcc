//! Skeleton decomposition of the directed-lattice walk.
//!
//! The chain splits into a vertical skeleton (a simple symmetric walk on Z
//! observed at vertical-move instants), geometric waiting times at each
//! level, and the horizontally embedded walk accumulating signed waiting
//! times. Waiting times are sampled lazily, keyed by `(seed, level, visit
//! index)`, so a coupled simulation of the full chain and its decomposition
//! consumes identical randomness and their agreement is an exact identity
//! rather than a distributional statement.

use std::collections::HashMap;

use thiserror::Error;

use crate::env::OrientationField;
use crate::rng::{self, tags, Stream};
use crate::walk::LatticePoint;

#[derive(Debug, Error, PartialEq)]
pub enum SkeletonError {
    #[error("path must start at 0")]
    PathNotAtOrigin,
    #[error("path increments must be +-1")]
    BadIncrement,
    #[error("path is not a first-crossing path of the strip (-{0}, {0})")]
    NotFirstCrossing(i64),
    #[error("strip width must be an even integer >= 2, got {0}")]
    BadStripWidth(i64),
}

/// Vertical skeleton: a simple symmetric walk with its exact occupation map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTrace {
    positions: Vec<i64>,
    occupation: HashMap<i64, u64>,
}

impl SkeletonTrace {
    /// Simulate `n` steps from the stream.
    pub fn simulate(n: u64, rng: &mut Stream) -> Self {
        let increments = (0..n).map(|_| rng.next_sign()).collect::<Vec<_>>();
        Self::from_increments(&increments)
    }

    pub fn from_increments(increments: &[i8]) -> Self {
        let mut positions = Vec::with_capacity(increments.len() + 1);
        let mut occupation = HashMap::new();
        let mut y = 0i64;
        positions.push(y);
        *occupation.entry(y).or_insert(0) += 1;
        for &psi in increments {
            debug_assert!(psi == 1 || psi == -1);
            y += psi as i64;
            positions.push(y);
            *occupation.entry(y).or_insert(0) += 1;
        }
        Self {
            positions,
            occupation,
        }
    }

    /// Number of steps n (positions has n + 1 entries).
    pub fn steps(&self) -> u64 {
        (self.positions.len() - 1) as u64
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn position(&self, n: u64) -> i64 {
        self.positions[n as usize]
    }

    /// Occupation over the whole trace, eta_n(y) with n = steps().
    pub fn occupation(&self) -> &HashMap<i64, u64> {
        &self.occupation
    }

    /// eta_m(y) for a prefix: number of k in 0..=m with Y_k = y.
    pub fn occupation_prefix(&self, m: u64) -> HashMap<i64, u64> {
        let mut eta = HashMap::new();
        for &y in &self.positions[..=m as usize] {
            *eta.entry(y).or_insert(0) += 1;
        }
        eta
    }

    /// Return times sigma_n (n >= 1): instants k >= 1 with Y_k = 0.
    pub fn return_times(&self) -> Vec<u64> {
        self.positions
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &y)| y == 0)
            .map(|(k, _)| k as u64)
            .collect()
    }
}

/// Lazily sampled waiting times xi_i^(y), i >= 1.
pub trait WaitingTimes {
    fn xi(&self, y: i64, visit: u64) -> u64;
}

/// Production table: each entry is a keyed one-shot geometric draw, so the
/// table needs no storage and the same (seed, y, visit) always yields the
/// same value.
#[derive(Debug, Clone)]
pub struct GeometricTable {
    seed: u64,
    p: f64,
}

impl GeometricTable {
    pub fn new(seed: u64, p: f64) -> Self {
        Self { seed, p }
    }

    pub fn standard(seed: u64) -> Self {
        Self::new(seed, 1.0 / 3.0)
    }
}

impl WaitingTimes for GeometricTable {
    fn xi(&self, y: i64, visit: u64) -> u64 {
        rng::geometric_at(&[self.seed, tags::XI, y as u64, visit], self.p)
    }
}

/// Explicit table for tests; unlisted entries default to 0.
#[derive(Debug, Clone, Default)]
pub struct StubTable {
    entries: HashMap<(i64, u64), u64>,
}

impl StubTable {
    pub fn new(entries: impl IntoIterator<Item = ((i64, u64), u64)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }
}

impl WaitingTimes for StubTable {
    fn xi(&self, y: i64, visit: u64) -> u64 {
        self.entries.get(&(y, visit)).copied().unwrap_or(0)
    }
}

/// Table wrapper shifting every entry by one; negative control for the
/// coupling validator.
#[derive(Debug, Clone)]
pub struct CorruptedTable<T>(pub T);

impl<T: WaitingTimes> WaitingTimes for CorruptedTable<T> {
    fn xi(&self, y: i64, visit: u64) -> u64 {
        self.0.xi(y, visit) + 1
    }
}

/// Incremental horizontally embedded walk X_0..X_n along the trace:
/// the step n contributes epsilon_{Y_{n-1}} * xi_{eta_{n-1}(Y_{n-1})}^{(Y_{n-1})}.
pub fn embedded_path<T: WaitingTimes>(
    trace: &SkeletonTrace,
    table: &T,
    field: &OrientationField,
) -> Vec<i64> {
    let mut xs = Vec::with_capacity(trace.positions().len());
    let mut visits: HashMap<i64, u64> = HashMap::new();
    let mut x = 0i64;
    xs.push(x);
    for n in 1..trace.positions().len() {
        let y = trace.positions()[n - 1];
        let c = visits.entry(y).or_insert(0);
        *c += 1;
        x += field.orientation_at(y) as i64 * table.xi(y, *c) as i64;
        xs.push(x);
    }
    xs
}

/// X_n evaluated from the defining double sum over the occupation of the
/// prefix of length n - 1. Cross-checks the incremental route.
pub fn embedded_position<T: WaitingTimes>(
    trace: &SkeletonTrace,
    table: &T,
    field: &OrientationField,
    n: u64,
) -> i64 {
    if n == 0 {
        return 0;
    }
    let eta = trace.occupation_prefix(n - 1);
    let mut x = 0i64;
    for (&y, &count) in &eta {
        let mut total = 0u64;
        for i in 1..=count {
            total += table.xi(y, i);
        }
        x += field.orientation_at(y) as i64 * total as i64;
    }
    x
}

/// Instants T_0..T_n just after each vertical move: T_n = n + total waiting
/// time accrued over the prefix.
pub fn vertical_instants<T: WaitingTimes>(trace: &SkeletonTrace, table: &T) -> Vec<u64> {
    let mut ts = Vec::with_capacity(trace.positions().len());
    let mut visits: HashMap<i64, u64> = HashMap::new();
    let mut t = 0u64;
    ts.push(t);
    for n in 1..trace.positions().len() {
        let y = trace.positions()[n - 1];
        let c = visits.entry(y).or_insert(0);
        *c += 1;
        t += table.xi(y, *c) + 1;
        ts.push(t);
    }
    ts
}

/// A full-chain run generated jointly with its decomposition from the same
/// keyed randomness.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub positions: Vec<LatticePoint>,
    pub trace: SkeletonTrace,
}

/// Simulate `n` vertical moves of the full chain: at every visit of level y
/// the walk performs its keyed waiting time of horizontal moves, then one
/// vertical move drawn from the skeleton stream.
pub fn simulate_coupled<T: WaitingTimes>(
    n: u64,
    field: &OrientationField,
    table: &T,
    skeleton_rng: &mut Stream,
) -> CoupledRun {
    let mut positions = Vec::new();
    let mut increments = Vec::with_capacity(n as usize);
    let mut visits: HashMap<i64, u64> = HashMap::new();
    let mut p = LatticePoint::ORIGIN;
    positions.push(p);
    for _ in 0..n {
        let y = p.y;
        let c = visits.entry(y).or_insert(0);
        *c += 1;
        let eps = field.orientation_at(y) as i64;
        for _ in 0..table.xi(y, *c) {
            p = LatticePoint::new(p.x + eps, p.y);
            positions.push(p);
        }
        let psi = skeleton_rng.next_sign();
        increments.push(psi);
        p = LatticePoint::new(p.x, p.y + psi as i64);
        positions.push(p);
    }
    CoupledRun {
        positions,
        trace: SkeletonTrace::from_increments(&increments),
    }
}

/// Verify the coupling identity M_{T_m} = (X_m, Y_m) for all m, with the
/// decomposition recomputed independently from `(trace, table, field)`, and
/// check that every transition of the run is an allowed edge.
pub fn check_coupling<T: WaitingTimes>(
    run: &CoupledRun,
    field: &OrientationField,
    table: &T,
) -> bool {
    if !run
        .positions
        .windows(2)
        .all(|w| crate::walk::is_allowed_edge(w[0], w[1], field))
    {
        return false;
    }
    let xs = embedded_path(&run.trace, table, field);
    let ts = vertical_instants(&run.trace, table);
    ts.iter().zip(xs.iter().zip(run.trace.positions())).all(
        |(&t, (&x, &y))| match run.positions.get(t as usize) {
            Some(&m) => m == LatticePoint::new(x, y),
            None => false,
        },
    )
}

/// Simulate one coupled run of `n` vertical moves from `seed` and check the
/// coupling identity.
pub fn couple_and_check(n: u64, field: &OrientationField, seed: u64) -> bool {
    let table = GeometricTable::standard(seed);
    let mut skel = Stream::new(&[seed, tags::SKELETON]);
    let run = simulate_coupled(n, field, &table, &mut skel);
    check_coupling(&run, field, &table)
}

/// Crossing times of width-Q strips and the rescaled crossing walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeChanges {
    pub strip_width: i64,
    /// tau_0 = 0 and the successive exit instants found in the trace.
    pub tau: Vec<u64>,
    /// Z_k = Y_{tau_k} / Q.
    pub z: Vec<i64>,
}

impl TimeChanges {
    /// Number of completed crossings.
    pub fn crossings(&self) -> usize {
        self.tau.len() - 1
    }

    /// Occupation of the crossing walk, varpi_n(z) over k = 1..=n.
    pub fn varpi(&self, z: i64, n: usize) -> u64 {
        self.z[1..=n].iter().filter(|&&v| v == z).count() as u64
    }
}

/// Successive exits of width-Q strips: tau_{n+1} is the first instant after
/// tau_n with |Y_k - Y_{tau_n}| = Q. A trace that is too short yields the
/// completed prefix.
pub fn crossing_times(trace: &SkeletonTrace, q: i64) -> Result<TimeChanges, SkeletonError> {
    if q < 2 || q % 2 != 0 {
        return Err(SkeletonError::BadStripWidth(q));
    }
    let mut tau = vec![0u64];
    let mut z = vec![0i64];
    let mut anchor = 0i64;
    let mut anchor_time = 0usize;
    loop {
        let mut next = None;
        for (k, &y) in trace.positions().iter().enumerate().skip(anchor_time + 1) {
            if (y - anchor).abs() == q {
                next = Some((k, y));
                break;
            }
        }
        match next {
            Some((k, y)) => {
                tau.push(k as u64);
                z.push(y / q);
                anchor = y;
                anchor_time = k;
            }
            None => break,
        }
    }
    Ok(TimeChanges {
        strip_width: q,
        tau,
        z,
    })
}

/// N_k(residue) = occupation of each residue class mod Q over the k-th
/// crossing window [tau_{k-1}, tau_k). Indexed by residue.
pub fn residue_counts(
    trace: &SkeletonTrace,
    times: &TimeChanges,
    k: usize,
) -> Vec<u64> {
    assert!(k >= 1 && k <= times.crossings(), "crossing {k} not in trace");
    let q = times.strip_width;
    let mut counts = vec![0u64; q as usize];
    let from = times.tau[k - 1] as usize;
    let to = times.tau[k] as usize;
    for &y in &trace.positions()[from..to] {
        counts[y.rem_euclid(q) as usize] += 1;
    }
    counts
}

/// The modified reflection principle: map a first-crossing path of the strip
/// (-Q, Q) to its mirror crossing path. The path is kept up to its last
/// visit R of 0, then the tail is time-reversed and shifted by the exit
/// level. Involutive, and preserves residue occupation exactly.
pub fn reflect_crossing(path: &[i64], q: i64) -> Result<Vec<i64>, SkeletonError> {
    if q < 2 || q % 2 != 0 {
        return Err(SkeletonError::BadStripWidth(q));
    }
    if path.is_empty() || path[0] != 0 {
        return Err(SkeletonError::PathNotAtOrigin);
    }
    if path.windows(2).any(|w| (w[1] - w[0]).abs() != 1) {
        return Err(SkeletonError::BadIncrement);
    }
    let last = path.len() - 1;
    if path[last].abs() != q || path[..last].iter().any(|&y| y.abs() >= q) {
        return Err(SkeletonError::NotFirstCrossing(q));
    }
    let exit = path[last];
    let r = path.iter().rposition(|&y| y == 0).expect("path starts at 0");
    let mut v = Vec::with_capacity(path.len());
    v.extend_from_slice(&path[..=r]);
    for t in r + 1..path.len() {
        v.push(path[last - (t - r)] - exit);
    }
    Ok(v)
}
