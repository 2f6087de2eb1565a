//! Differentially private building blocks: Laplace noise, a stability-based
//! histogram, the exponential mechanism over a finite hypothesis list, and
//! closed-form audits of both.

pub mod audit;
pub mod exponential;
pub mod histogram;
pub mod laplace;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use audit::{audit_em_dp, audit_hist_release_dp, HistReleaseAudit};
pub use exponential::{em_exact_distribution, generic_learner, EmDistribution};
pub use histogram::{
    hist_accuracy_check, release_probability, release_threshold, stable_histogram,
    stable_histogram_counts, HistogramOutput,
};

/// `(ε, δ)`; `δ = 0` is pure DP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(
                "epsilon",
                format!("{epsilon} must be positive and finite"),
            ));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid("delta", format!("{delta} not in [0, 1)")));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}
