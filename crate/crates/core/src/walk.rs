//! The full two-dimensional chain on the directed lattice.
//!
//! From any vertex the walk has exactly three allowed moves: up, down, and
//! one horizontal move in the direction prescribed by the level's
//! orientation. Each is taken with probability 1/3.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::env::OrientationField;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { x: 0, y: 0 };

    pub fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

/// Source of the three-way step decision. Production code uses a keyed
/// [`Stream`]; tests may force a fixed move sequence.
pub trait DirectionSource {
    /// Index into the canonical neighbor order: 0 = up, 1 = down, 2 = horizontal.
    fn next_direction(&mut self) -> usize;
}

impl DirectionSource for Stream {
    fn next_direction(&mut self) -> usize {
        self.next_of_three()
    }
}

/// Fixed move sequence for deterministic tests.
pub struct ForcedDirections {
    moves: Vec<usize>,
    index: usize,
}

impl ForcedDirections {
    pub fn new(moves: Vec<usize>) -> Self {
        Self { moves, index: 0 }
    }
}

impl DirectionSource for ForcedDirections {
    fn next_direction(&mut self) -> usize {
        let m = self.moves[self.index % self.moves.len()];
        self.index += 1;
        m
    }
}

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const HORIZONTAL: usize = 2;

/// The three allowed neighbors of `p`, in canonical order (up, down, horizontal).
pub fn allowed_neighbors(p: LatticePoint, field: &OrientationField) -> [LatticePoint; 3] {
    let eps = field.orientation_at(p.y) as i64;
    [
        LatticePoint::new(p.x, p.y + 1),
        LatticePoint::new(p.x, p.y - 1),
        LatticePoint::new(p.x + eps, p.y),
    ]
}

/// True iff `(from, to)` is an allowed edge of the directed lattice.
pub fn is_allowed_edge(from: LatticePoint, to: LatticePoint, field: &OrientationField) -> bool {
    allowed_neighbors(from, field).contains(&to)
}

/// One uniform step of the chain.
pub fn step<D: DirectionSource>(
    p: LatticePoint,
    field: &OrientationField,
    rng: &mut D,
) -> LatticePoint {
    allowed_neighbors(p, field)[rng.next_direction()]
}

/// Statistics of a single run, folded on the fly (no trajectory retained).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: u64,
    pub returns_to_start: u64,
    pub first_return_time: Option<u64>,
    pub final_position: LatticePoint,
}

/// Run `n_steps` steps from `start`, counting returns to the start.
pub fn run_and_count_returns<D: DirectionSource>(
    start: LatticePoint,
    field: &OrientationField,
    n_steps: u64,
    rng: &mut D,
) -> RunStats {
    let mut p = start;
    let mut returns = 0;
    let mut first_return = None;
    for k in 1..=n_steps {
        p = step(p, field, rng);
        if p == start {
            returns += 1;
            first_return.get_or_insert(k);
        }
    }
    RunStats {
        steps: n_steps,
        returns_to_start: returns,
        first_return_time: first_return,
        final_position: p,
    }
}

/// A run that retains its full trajectory.
#[derive(Debug, Clone)]
pub struct WalkRun {
    pub start: LatticePoint,
    pub positions: Vec<LatticePoint>,
}

impl WalkRun {
    pub fn simulate<D: DirectionSource>(
        start: LatticePoint,
        field: &OrientationField,
        n_steps: u64,
        rng: &mut D,
    ) -> Self {
        let mut positions = Vec::with_capacity(n_steps as usize + 1);
        positions.push(start);
        let mut p = start;
        for _ in 0..n_steps {
            p = step(p, field, rng);
            positions.push(p);
        }
        Self { start, positions }
    }

    /// Every consecutive pair must be an allowed edge.
    pub fn validate(&self, field: &OrientationField) -> bool {
        self.positions[0] == self.start
            && self
                .positions
                .windows(2)
                .all(|w| is_allowed_edge(w[0], w[1], field))
    }

    /// Trajectory dump, one "x<TAB>y" line per position.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for p in &self.positions {
            writeln!(out, "{}\t{}", p.x, p.y)?;
        }
        Ok(())
    }
}
