//! Numerical laboratory for the normalized Kähler-Ricci flow on rotationally
//! symmetric metrics of the projective line.
//!
//! Metrics are held in conformal gauge `g = e^{2w} g_round` on a staggered
//! colatitude grid. [`potential`] solves for the Ricci potential,
//! [`spectral`] computes the weighted Laplacian spectrum, [`flow`] integrates
//! the flow, [`monitors`] checks the convergence argument's estimates along
//! trajectories and [`harness`] runs configured experiments.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod monitors;
pub mod potential;
pub mod spectral;
pub mod tridiag;

pub use error::{Error, Result};
