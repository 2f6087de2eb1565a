//! Exact privacy audits.

use serde::{Deserialize, Serialize};

use super::exponential::em_exact_distribution;
use super::histogram::release_probability;
use super::PrivacyParams;
use crate::concept::{Hypothesis, Sample};
use crate::error::{invalid, Error, Result};

/// Worst-case `|ln(p_S(h)/p_S'(h))|` of the exponential mechanism over all
/// outputs, for samples differing in exactly one position.
pub fn audit_em_dp(
    hs: &[Hypothesis],
    s: &Sample,
    s_neighbor: &Sample,
    epsilon: f64,
) -> Result<f64> {
    if s.len() != s_neighbor.len() {
        return Err(Error::NotNeighbors(format!(
            "lengths {} and {}",
            s.len(),
            s_neighbor.len()
        )));
    }
    let differing = s
        .examples()
        .iter()
        .zip(s_neighbor.examples())
        .filter(|(a, b)| a != b)
        .count();
    if differing != 1 {
        return Err(Error::NotNeighbors(format!("{differing} positions differ")));
    }
    let p = em_exact_distribution(hs, s, epsilon)?;
    let q = em_exact_distribution(hs, s_neighbor, epsilon)?;
    Ok(p.log_probabilities
        .iter()
        .zip(&q.log_probabilities)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Release probabilities of one item at count `c` and its neighbors `c ± 1`
/// (those within `[0, k]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistReleaseAudit {
    pub count: u64,
    pub p: f64,
    pub p_minus: Option<f64>,
    pub p_plus: Option<f64>,
    /// `p ≤ e^ε·p′ + δ` and `p′ ≤ e^ε·p + δ` for every neighbor `p′`.
    pub passes: bool,
}

fn indistinguishable(a: f64, b: f64, privacy: &PrivacyParams) -> bool {
    let e = privacy.epsilon.exp();
    // Relative slack for rounding in the closed forms.
    let tol = 1e-12 * a.max(b);
    a <= e * b + privacy.delta + tol && b <= e * a + privacy.delta + tol
}

pub fn audit_hist_release_dp(
    count: u64,
    k: u64,
    privacy: &PrivacyParams,
) -> Result<HistReleaseAudit> {
    if count > k {
        return Err(invalid("count", format!("{count} exceeds k = {k}")));
    }
    let p = release_probability(count, privacy)?;
    let p_minus = count
        .checked_sub(1)
        .map(|c| release_probability(c, privacy))
        .transpose()?;
    let p_plus = (count < k)
        .then(|| release_probability(count + 1, privacy))
        .transpose()?;
    let passes = [p_minus, p_plus]
        .into_iter()
        .flatten()
        .all(|q| indistinguishable(p, q, privacy));
    Ok(HistReleaseAudit {
        count,
        p,
        p_minus,
        p_plus,
        passes,
    })
}
