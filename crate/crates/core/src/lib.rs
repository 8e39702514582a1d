//! Resonance fluorescence of a coherently driven two-level emitter as seen
//! through a detector of finite linewidth, with and without homodyne
//! interference against an attenuated copy of the driving laser.
//!
//! The detector is modelled as a weakly coupled harmonic oscillator (the
//! "sensor" picture). The crate provides
//!
//! - [`model`]: parameters, validation and flat config files,
//! - [`moments`]: steady-state normally ordered moments, by block recursion
//!   at vanishing drive and by a truncated Liouvillian null-space solve,
//! - [`analytic`]: closed forms for filtered and homodyne photon
//!   correlations, compensation conditions, spectra and emission rates,
//! - [`dynamics`]: two-time correlators through the quantum regression
//!   theorem, delayed `g2(tau)` and emission spectra,
//! - [`trajectories`]: quantum-jump Monte Carlo click trains and their
//!   waiting-time statistics,
//! - [`acceptance`]: the verification suite shared by the test harness and
//!   the `heitler verify` command.
//!
//! All rates are measured in units of the emitter decay rate; inputs with a
//! different unit are rescaled on entry.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analytic;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod trajectories;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
