//! Charging of open spin-chain quantum batteries under homodyne-based
//! feedback control.
//!
//! The crate is `no_std` (with `alloc`) and contains only numerics:
//!
//! - [`operators`]: Pauli embeddings, the battery Hamiltonian, feedback
//!   operators and Hermitian spectra.
//! - [`dynamics`]: the ensemble-averaged feedback master equation (zero and
//!   finite temperature), RK4 propagation and steady-state solving.
//! - [`trajectories`]: homodyne currents, Euler–Maruyama stochastic master
//!   equation steps and trajectory ensembles.
//! - [`metrics`]: stored energy, ergotropy, capacity and utilization.
//! - [`oracles`]: closed-form two-site results used as independent checks.
//! - [`sweeps`]: parameter grids, feedback-strength optimization and
//!   critical-coupling search.
//!
//! Energies are in units of the field strength `h` in practice, and all
//! times are reported as `Γt`.
#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod executor;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod oracles;
pub mod search;
pub mod sweeps;
pub mod trajectories;

pub use dynamics::{DensityMatrix, EvolutionResult, Generator, SteadyState};
pub use error::{Error, Result};
pub use linalg::{c64, Operator};
pub use metrics::MetricsRecord;
pub use operators::{ChainSpec, ControlSpec};
