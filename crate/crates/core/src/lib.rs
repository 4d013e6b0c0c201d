//! Simulation and waveform design for the dual-pulse, off-resonant
//! modulated-driving Rydberg blockade controlled-PHASE gate.
//!
//! * [`waveform`]: Bernstein amplitude envelopes.
//! * [`physics`]: per-channel Hamiltonians with Doppler shifts and decay.
//! * [`propagator`]: adaptive Schrödinger integration.
//! * [`gate`]: dual-pulse composition, local phases, fidelity.
//! * [`scans`]: velocity, temperature, decay and blockade sweeps.
//! * [`optimizer`]: direct-search waveform refinement.

pub mod error;
pub mod gate;
pub mod optimizer;
pub mod physics;
pub mod propagator;
pub mod scans;
pub mod waveform;

pub use error::{Error, Result};
