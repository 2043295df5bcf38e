//! Classical emulation of the Schrödingerisation method for linear SDEs.
//!
//! The solver replaces the noise on each time interval by a constant forcing,
//! lifts the resulting piecewise-linear ODE into one extra auxiliary variable
//! `p` through the warped phase transform `v(t, p) = e^{-p} z(t)`, and evolves
//! the Fourier coefficients in `p` under a piecewise-constant Hermitian
//! generator. The state is read back by normalized integration over a
//! recovery window.
//!
//! Modules, bottom-up:
//!
//! - [`noise`]: common-random-number Brownian and α-stable increments.
//! - [`model`]: linear SDE problems, per-step extended matrices and their
//!   Hermitian split, multi-sample block systems.
//! - [`spectral`]: the `p` grid, warped initial data and the Fourier pair.
//! - [`evolve`]: RK2 and exact-unitary steppers for the coefficient system.
//! - [`recover`]: normalized integration and recovery-window strategies.
//! - [`reference`]: Euler–Maruyama, Milstein and exact reference solutions.
//! - [`analysis`]: error metrics, order regression and gate-cost models.
//! - [`experiment`]: presets, Monte Carlo driver and CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod recover;
pub mod reference;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use model::{ExtendedMatrix, HermitianPair, NoiseKind, SdeProblem};
pub use noise::NoisePath;
pub use recover::RecoveryWindow;
pub use spectral::{CoefficientState, GridState, SpectralGrid};
