#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Discontinuous viscosity solutions of `u_t + H(u_x) = 0` in one space
//! dimension, computed by splitting the domain at the jumps of the initial
//! datum and solving singular Neumann problems on each side.

pub mod dual_cl;
pub mod envelope;
pub mod error;
pub mod hamiltonian;
pub mod orchestrator;
pub mod scenario;
pub mod scheme;
pub mod verify;

pub use error::{HjError, Result};
