// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dissipative Floquet-Lindblad simulation of GHZ/W interconversion in a
//! three-atom Rydberg array.
//!
//! The crate is organized around the physical pipeline:
//!
//! - [`operator`] — dense operators, superoperators, vectorization, and the
//!   Lindblad generator in Fock-Liouville space;
//! - [`atomic`] — the 27-dimensional three-atom basis, the named entangled
//!   states, the full and effective Hamiltonians, and the Zeno projection;
//! - [`dissipation`] — engineered decay channels (conditional and
//!   unconditional) with their single-atom validation models;
//! - [`dynamics`] — master-equation propagation (superoperator exponentials,
//!   adaptive Runge-Kutta, carrier-resolved full-model stepping);
//! - [`protocol`] — the six-step conversion cycles, the one-period effective
//!   Liouvillian, and its spectral analysis;
//! - [`perturb`] — laser phase noise, geometric imperfections, timing errors,
//!   Gaussian pulse shaping, and detuning offsets;
//! - [`experiment`] — the configuration schema, experiment drivers, and
//!   CSV/JSON output used by the `flsim` binary.
//!
//! All frequencies are stored as angular frequencies (rad/s). The convention
//! for entering plain MHz lives at the configuration boundary, which applies
//! the 2π factor exactly once.

pub mod linalg;
pub mod atomic;
pub mod dissipation;
pub mod dynamics;
pub mod experiment;
pub mod perturb;
pub mod protocol;
pub mod operator;

pub use linalg::{CMat, LinalgError};
