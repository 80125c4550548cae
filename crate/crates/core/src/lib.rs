//! Simulation of a double-pass, continuously measured atomic magnetometer.
//!
//! The crate integrates the conditional master equation of a collective spin
//! under Larmor precession, Faraday measurement and double-pass optical
//! feedback, and estimates the quantum Fisher information about the field by
//! running filters at `B` and `B +- dB` on a shared noise realization.
//!
//! Module map:
//! - [`spin`] / [`state`]: collective spin operators, coherent states, moments.
//! - [`filter`]: drift/diffusion of the conditional master equation and its
//!   normalized Euler–Maruyama step on density matrices.
//! - [`propagator`]: the equivalent O(n) split-step propagator for pure states.
//! - [`noise`] / [`engine`]: reproducible Wiener paths, measurement records,
//!   coupled `(B, B+dB, B-dB)` trajectories.
//! - [`fisher`]: finite-difference SLD, conditional and ensemble QFI, bounds.
//! - [`experiments`]: field-uncertainty sweeps, K optimization, power-law fits.
//! - [`config`] / [`output`] / [`commands`]: run configuration, CSV/JSON
//!   output and the command implementations behind the `doublepass` binary.

pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod fisher;
pub mod noise;
pub mod output;
pub mod propagator;
pub mod spin;
pub mod state;

pub use error::{Error, Result};
