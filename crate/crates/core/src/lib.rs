//! Quantum geometry of the extended Lipkin-Meshkov-Glick model.
//!
//! The model is `H = Ω Jz + Ωx Jx + (ξy/j) Jy²` on the symmetric spin-`j`
//! sector. The crate computes the quantum geometric tensor (metric and Berry
//! curvature) of a chosen eigenstate over the `(Ωx, ξy)` parameter plane by
//! exact diagonalization, the scalar curvature of the resulting metric, and
//! three analytic layers used to validate the numerics:
//!
//! - [`semiclassical`]: classical energy surface, stationary points,
//!   Lyapunov exponent and critical lines.
//! - [`holstein_primakoff`]: thermodynamic-limit metrics from the truncated
//!   boson expansion, including a Gaussian-state construction of the broken
//!   phase.
//! - [`coherent`]: Bloch coherent states and their geometric tensor.
//!
//! [`analysis`] extracts finite-size peaks and fits scaling forms, and [`io`]
//! and [`cli`] expose everything through CSV/JSON files and the `lmg` binary.

#![forbid(unsafe_code)]

pub mod analysis;
pub mod cli;
pub mod coherent;
pub mod error;
pub mod geometry;
pub mod holstein_primakoff;
pub mod io;
pub mod qgt;
pub mod semiclassical;
pub mod spectral;
pub mod spin;
mod util;

pub use error::{Error, Result};
pub use qgt::{QgtField, QgtPoint};
pub use spectral::{Spectrum, StateSelector};
pub use spin::{HermitianOperator, ModelParams, SpinMagnitude};
