//! Certified enclosures of the diffusion coefficient of a bounded-variation
//! observable over a piecewise expanding interval map.
//!
//! The transfer operator is discretized with Ulam's method on a uniform mesh;
//! every quantity that enters the final enclosure is computed in outward-rounded
//! interval arithmetic.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod decay;
pub mod density;
pub mod diffusion;
pub mod error;
pub mod map_model;
pub mod mc_check;
pub mod rigor;
pub mod ulam;

pub use error::{Error, Result};
