//! Nonholonomic Celtic stone on a horizontal plane, its return map on a fixed energy
//! level, and the tools used to find a discrete Lorenz attractor in it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod andoyer;
pub mod error;
pub mod integrator;
pub mod physics;
pub mod poincare;

pub use error::{Error, Result};
