//! Projection and splitting methods for the minimum-energy control of the
//! double integrator with a bounded control.
//!
//! The feasible set is split into an affine set `A` (Euler-discretised
//! dynamics plus boundary conditions) and a box `B` (`|u| <= a`). Both
//! projectors are available in closed form ([`projectors`]), and the
//! [`solvers`] module composes them into Dykstra, Douglas–Rachford,
//! Aragón Artacho–Campoy and alternating-projection iterations that all
//! target the minimum-norm point of `A ∩ B`.
//!
//! [`analytic`] provides the closed-form unconstrained solution and an
//! independent oracle for the constrained problem; [`metrics`] and
//! [`sweeps`] reproduce error tables and parameter studies on top of them.

pub mod analytic;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod metrics;
pub mod problem;
pub mod projectors;
pub mod reference;
pub mod solvers;
pub mod sweeps;

pub use error::{Error, Result};
pub use problem::{ControlVector, Grid, ProblemSpec, StateTrajectory};
