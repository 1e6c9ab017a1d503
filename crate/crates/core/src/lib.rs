//! Quantum circuit compilation on a gate lattice: encoding, infidelity cost,
//! rewrite rules, simulated and quantum annealing, and noisy verification.

pub mod class;
pub mod cost;
pub mod error;
pub mod lattice;
pub mod noise;
pub mod presets;
pub mod qa;
pub mod random;
pub mod rules;
pub mod sa;
pub mod semantics;

pub use error::{Error, Result};
