//! Simulation and analysis of repeat-until-success (RUS) quantum circuits.
//!
//! * [`qcore`]: dense states and unitaries, ancilla measurement, isometry completion.
//! * [`rus`]: synthesis of an explicit RUS unitary, the repeat loop, the inverse circuit.
//! * [`oaa`]: generalized reflections with standard, deterministic, π/3 and
//!   Chebyshev fixed-point oblivious amplitude amplification.
//! * [`distortion`]: conditionally controlled RUS, amplitude-distortion closed
//!   forms and their Monte Carlo estimator.
//! * [`tcost`]: T-gate cost models for reaching a target success probability.
//! * [`table`]: CSV rendering of figure datasets.
//!
//! Register order everywhere is ancillas, then data, then control (big-endian).

// Range checks are written `!(lo <= x && x <= hi)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distortion;
pub mod error;
pub mod oaa;
pub mod qcore;
pub mod rng;
pub mod rus;
pub mod table;
pub mod tcost;

pub use error::{Error, Result};
pub use qcore::{StateVector, UnitaryMatrix, C64};
pub use rng::RngStream;
pub use rus::{RunRecord, RusCircuit, RusSpec};
