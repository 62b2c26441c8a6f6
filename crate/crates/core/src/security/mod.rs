//! Binding bound, finite-statistics estimation of single-photon counts, and
//! Bob's verification decision.

mod binding;
mod estimation;
mod info;
mod verify;

pub use binding::{
    combinatorial_factor, epsilon_b_bound, floor_error_budget, ln_combinatorial_factor, BindingBound,
    BoundComponents,
};
pub use estimation::{
    count_errors, estimate_n_single, p_multi_bound, solve_delta_multi, Declaration, ErrorCounts,
    EstimationResult,
};
pub use info::{binary_entropy, kl_divergence};
pub use verify::{verify, EstimationMode, VerdictReason, VerificationInput, VerificationVerdict};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    /// Minimum single-photon detections required per basis.
    pub n_tol: u64,
    /// Tolerated error fraction.
    pub e_tol: f64,
    pub eps_rect: f64,
    pub eps_diag: f64,
    /// Mean photon number Bob's source is specified at.
    pub mu: f64,
    /// Bound on the source's relative intensity fluctuation.
    pub intensity_fluctuation: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            n_tol: 107,
            e_tol: 0.015,
            eps_rect: 0.21e-2,
            eps_diag: 0.21e-2,
            mu: 0.183,
            intensity_fluctuation: 0.1,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_tol < 1 {
            return Err(Error::param("security.n_tol", "must be >= 1"));
        }
        if !(0.0..0.5).contains(&self.e_tol) {
            return Err(Error::param("security.e_tol", "must lie in [0, 0.5)"));
        }
        for (name, eps) in [("security.eps_rect", self.eps_rect), ("security.eps_diag", self.eps_diag)] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::param(name, "must lie in (0, 1)"));
            }
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param("security.mu", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.intensity_fluctuation) {
            return Err(Error::param("security.intensity_fluctuation", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Largest tolerated error count, `floor(e_tol * n_tol)`.
    pub fn max_errors(&self) -> u64 {
        floor_error_budget(self.e_tol, self.n_tol)
    }
}
