//! Numerical toolkit for round spheres with thin handles attached: epsilon-nets,
//! thread systems, the hybrid path metric, tunnel profiles, pipe-filling
//! distance budgets and a convergence harness.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod budget;
pub mod cli;
pub mod config;
pub mod convergence;
pub mod error;
pub mod hybrid;
pub mod quad;
pub mod sphere;
pub mod threads;
pub mod tolerance;
pub mod tunnel;

pub use error::{Error, Result};
