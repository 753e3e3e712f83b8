//! Wasserstein distributionally robust nonlinear model predictive control
//! built on iterative LQR.
//!
//! The pipeline is:
//!
//! 1. linearize a discrete-time nonlinear model along a nominal trajectory
//!    ([`linearize`]),
//! 2. compute time-varying feedback gains by a backward Riccati sweep
//!    ([`riccati`]),
//! 3. tighten linear state constraints by exact worst-case expectations over a
//!    type-1 Wasserstein ball propagated through the closed loop
//!    ([`ambiguity`], [`backoff`]),
//! 4. solve the tightened nominal OCP ([`ocp`]) and iterate to a fixed point
//!    ([`drilqr`]).
//!
//! [`tube`] bounds the Wasserstein distance of the propagated error
//! distributions, [`linerr`] bounds the linearization remainder, and [`sim`]
//! runs seeded closed-loop Monte-Carlo experiments.

pub mod ambiguity;
pub mod backoff;
pub mod drilqr;
mod error;
pub mod io;
pub mod linearize;
pub mod linerr;
pub mod model;
pub mod ocp;
pub mod riccati;
pub mod sim;
pub mod tube;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};

/// Dense column vector used throughout the crate.
pub type Vector = DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;
