//! Simulation kernels and numerical checks for the lattice stochastic heat
//! equation
//!
//! ```text
//! du_t(x) = (G u_t)(x) dt + λ σ(u_t(x)) dB_t(x),   u_0 = c_0 δ_0,
//! ```
//!
//! on `Z^d`, where `G` is the generator of a finite-range, mean-zero
//! compound Poisson walk. The crate is `no_std` (it needs `alloc`) and holds
//! only the algorithms; file formats, the command line and thread pools live
//! in the `pamsim` companion crate.
//!
//! Layout:
//! - [`model`]: step distributions, the generator, the nonlinearity.
//! - [`kernel`]: transition probabilities `p_t` and Gaussian tail checks.
//! - [`sde`]: Euler–Maruyama time stepping and total-mass trajectories.
//! - [`analysis`]: fractional moments, decay fits, sweeps, bound checks.
//! - [`greens`]: the collision local time `Υ(0)` and subcritical bounds.
//! - [`odeclass`]: the differential-inequality function class and its decay laws.
//! - [`continuum`]: finite-difference solver for the 1-D continuum equation.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::explicit_counter_loop)]

extern crate alloc;

pub mod analysis;
pub mod continuum;
pub mod greens;
pub mod kernel;
pub mod model;
pub mod odeclass;
pub mod rng;
pub mod sde;
pub mod stats;

mod lattice;
mod math;
mod quad;

pub use model::{LatticeField, Model, Nonlinearity, StepDistribution};
pub use sde::{BoxPolicy, MassTrajectory, Scheme, SimParams};
