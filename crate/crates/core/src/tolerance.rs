//! Numerical tolerances shared by every module.
//!
//! Algebraic identities (law of cosines, closed-form heights) are held to
//! `ALGEBRAIC`; metric axioms evaluated through longer float pipelines use
//! `METRIC`; iterative searches (midpoint defect, net repair) stop at `SEARCH`.

use serde::{Deserialize, Serialize};

/// Closed-form identities evaluated in f64.
pub const ALGEBRAIC: f64 = 1e-12;

/// Metric axioms (triangle inequality, symmetry) over composed distances.
pub const METRIC: f64 = 1e-10;

/// Stopping resolution of iterative searches.
pub const SEARCH: f64 = 1e-6;

/// Margin applied to strict inequalities such as endpoint spacing.
pub const STRICT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub algebraic: f64,
    pub metric: f64,
    pub search: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: ALGEBRAIC,
            metric: METRIC,
            search: SEARCH,
        }
    }
}
