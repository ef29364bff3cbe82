//! Pulse-level fault simulation for flux-tuned transmon CZ gates, with a
//! gate-level fault simulator and chi-square test-repetition analysis on top.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`]: dense complex matrices, `expm`, tensor embedding.
//! * [`device`]: two-qutrit Hamiltonian, dressed eigenstates, decoherence rates.
//! * [`pulses`]: frequency-tuning waveforms and CZ calibration.
//! * [`evolution`]: time-ordered unitary propagation and a Lindblad integrator.
//! * [`gate`]: turns a pulse into a characterised two-qubit CZ channel.
//! * [`faults`]: fault taxonomy and injectors.
//! * [`metrics`]: state and gate fidelities.
//! * [`circuits`]: gate-level circuits and density-matrix simulation.
//! * [`stats`] / [`testgen`]: chi-square machinery and test-repetition search.

pub mod circuits;
pub mod device;
pub mod error;
pub mod evolution;
pub mod faults;
pub mod gate;
pub mod linalg;
pub mod metrics;
pub mod pulses;
pub mod stats;
pub mod testgen;

pub use error::{Error, Result};
pub use linalg::{DensityMatrix, Operator, C64};
