//! Simulation and semi-analytic verification toolkit for simple random
//! walks on horizontally directed square lattices.
//!
//! The lattice keeps vertical edges two-way while each horizontal line `y`
//! is one-way in a direction `epsilon_y` prescribed by an environment:
//! deterministic (alternating, half-plane), i.i.d. uniform, or a periodic
//! pattern perturbed by random defects whose probability decays like
//! `c / |y|^beta`. The toolkit simulates the walk, its skeleton
//! decomposition and quenched return-probability oracles, measures
//! recurrence/transience evidence at desk scale, and builds deterministic
//! sparse-defect certificates.

pub mod config;
pub mod counterexample;
pub mod diagnostics;
pub mod env;
pub mod fourier;
pub mod rng;
pub mod skeleton;
pub mod stats;
pub mod verifiers;
pub mod walk;
