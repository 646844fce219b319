//! Simulation of a boundary time crystal used as an AC-field sensor.
//!
//! `N` spins-1/2 with collective decay are evolved in the permutation-symmetric
//! (Dicke) sector together with the derivative of the state with respect to the
//! field strength, which gives the quantum Fisher information of the field
//! without finite differences.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod meanfield;
pub mod ode;
pub mod qfi;
pub mod runner;
pub mod spin;

pub use dynamics::{integrate, ObservableRecord, SimParams, Trajectory};
pub use error::{Error, Result};
pub use runner::{resonance_defaults, RunConfig};
pub use spin::{build_spin_operators, DensityMatrix, SpinOperators};
