//! Simulation and analysis toolkit for probe-qubit spectroscopy of Pauli
//! Hamiltonians.
//!
//! A single ancilla "probe" qubit is coupled to one site of a small system
//! Hamiltonian and driven at a frequency `omega`; dips in the probe's
//! `<Z>` after time evolution sit at transition energies of the system.
//! This crate provides the pieces of that pipeline:
//!
//! - [`pauli`]: Pauli strings, Hamiltonians, and the model builders
//!   (Landau-Zener two-level system, transverse-field Kitaev chains).
//! - [`exact`]: dense diagonalization, parity labeling, transition tables.
//! - [`sim`]: the statevector simulator and Trotterized resonance circuits.
//! - [`oracles`]: closed-form and perturbative predictions used to
//!   cross-check the simulator.
//! - [`spectroscopy`]: frequency sweeps, dip detection and fitting.
//! - [`kitaev`]: phase-boundary extraction of the two-site chain.
//! - [`resources`]: gate counts and error-model scoring for the circuits.

pub mod error;
pub mod exact;
pub mod fit;
pub mod kitaev;
pub mod oracles;
pub mod pauli;
pub mod resources;
pub mod sim;
pub mod spectroscopy;

pub use error::{Error, Result};
