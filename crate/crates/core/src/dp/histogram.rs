//! Stability-based histogram over a list of items.
//!
//! Each distinct item's count gets independent `Lap(2/ε)` noise and is
//! released when the noisy count exceeds `t = 1 + 2·ln(1/δ)/ε`. Neighboring
//! inputs change at most two counts by one each, which costs `ε/2` apiece;
//! an item entering the support from count 0 is released with probability
//! exactly `δ/2`.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{laplace, PrivacyParams};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramOutput<T: Ord> {
    /// Released items in sorted order.
    pub released: Vec<T>,
    /// `clamp(noisy count / k, 0, 1)` for every released item.
    pub estimates: BTreeMap<T, f64>,
}

fn noise_scale(epsilon: f64) -> f64 {
    2.0 / epsilon
}

/// The release threshold on noisy counts.
pub fn release_threshold(privacy: &PrivacyParams) -> Result<f64> {
    if privacy.delta <= 0.0 {
        return Err(invalid("delta", "the histogram needs delta > 0"));
    }
    Ok(1.0 + 2.0 * (1.0 / privacy.delta).ln() / privacy.epsilon)
}

/// `Pr[c + Lap(2/ε) > t]`; zero for `c = 0` since absent items are never
/// considered.
pub fn release_probability(count: u64, privacy: &PrivacyParams) -> Result<f64> {
    let t = release_threshold(privacy)?;
    if count == 0 {
        return Ok(0.0);
    }
    Ok(laplace::survival(
        t - count as f64,
        noise_scale(privacy.epsilon),
    ))
}

pub fn stable_histogram<T: Ord + Clone, R: RngCore + ?Sized>(
    items: &[T],
    privacy: &PrivacyParams,
    rng: &mut R,
) -> Result<HistogramOutput<T>> {
    let mut counts: BTreeMap<T, u64> = BTreeMap::new();
    for item in items {
        *counts.entry(item.clone()).or_default() += 1;
    }
    stable_histogram_counts(&counts, items.len() as u64, privacy, rng)
}

/// Same mechanism on pre-aggregated counts of `k` items. Noise is drawn for
/// each distinct item in sorted order.
pub fn stable_histogram_counts<T: Ord + Clone, R: RngCore + ?Sized>(
    counts: &BTreeMap<T, u64>,
    k: u64,
    privacy: &PrivacyParams,
    rng: &mut R,
) -> Result<HistogramOutput<T>> {
    if k == 0 {
        return Err(invalid("items", "histogram input must be nonempty"));
    }
    if counts.values().sum::<u64>() != k {
        return Err(invalid("counts", format!("do not sum to k = {k}")));
    }
    let t = release_threshold(privacy)?;
    let b = noise_scale(privacy.epsilon);
    let mut out = HistogramOutput {
        released: Vec::new(),
        estimates: BTreeMap::new(),
    };
    for (item, &c) in counts.iter().filter(|(_, &c)| c > 0) {
        let noisy = c as f64 + laplace::sample(rng, b);
        if noisy > t {
            out.released.push(item.clone());
            out.estimates
                .insert(item.clone(), (noisy / k as f64).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// Sufficient condition for accuracy: with `k` items, every item of frequency
/// at least `η` is released with `|estimate − freq| ≤ η`, except with
/// probability at most `β`.
///
/// There are at most `⌊1/η⌋` such items. Each one misses the threshold with
/// probability at most `Pr[Lap(b) ≤ t − ηk]`, and its noise exceeds `ηk` in
/// absolute value with probability `exp(−ηk/b)`; the union bound over both
/// events and all heavy items must stay below `β`.
pub fn hist_accuracy_check(k: u64, eta: f64, beta: f64, privacy: &PrivacyParams) -> bool {
    hist_failure_bound(k as f64, eta, privacy).is_some_and(|p| p <= beta)
}

pub(crate) fn hist_failure_bound(k: f64, eta: f64, privacy: &PrivacyParams) -> Option<f64> {
    if !(eta > 0.0 && eta <= 1.0) || k < 1.0 {
        return None;
    }
    let t = release_threshold(privacy).ok()?;
    let b = noise_scale(privacy.epsilon);
    let heavy = (1.0 / eta).floor();
    let margin = eta * k;
    Some(heavy * (laplace::cdf(t - margin, b) + (-margin / b).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(e: f64, d: f64) -> PrivacyParams {
        PrivacyParams::new(e, d).unwrap()
    }

    #[test]
    fn threshold_closed_form() {
        let t = release_threshold(&p(1.0, 1e-6)).unwrap();
        assert!((t - (1.0 + 2.0 * 1e6f64.ln())).abs() < 1e-12);
        assert!(release_threshold(&p(1.0, 0.0)).is_err());
    }

    #[test]
    fn single_occurrence_release_is_half_delta() {
        let r = release_probability(1, &p(1.0, 1e-6)).unwrap();
        assert!((r - 5e-7).abs() < 1e-18);
        assert_eq!(release_probability(0, &p(1.0, 1e-6)).unwrap(), 0.0);
    }

    #[test]
    fn identical_items_released() {
        let items = vec![7u32; 10_000];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let h = stable_histogram(&items, &p(1.0, 1e-6), &mut rng).unwrap();
            assert_eq!(h.released, vec![7]);
            assert!((h.estimates[&7] - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn rejects_pure_dp_and_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(stable_histogram(&[1], &p(1.0, 0.0), &mut rng).is_err());
        assert!(stable_histogram::<u8, _>(&[], &p(1.0, 1e-6), &mut rng).is_err());
    }

    #[test]
    fn accuracy_check_examples() {
        assert!(hist_accuracy_check(
            10_000_000,
            1.0 / 1024.0,
            0.1,
            &p(0.5, 1e-6)
        ));
        assert!(!hist_accuracy_check(10, 1.0 / 1024.0, 0.1, &p(0.5, 1e-6)));
        assert!(hist_accuracy_check(1 << 40, 1.0, 0.1, &p(0.5, 1e-6)));
    }

    #[test]
    fn accuracy_check_is_monotone_in_k() {
        let pp = p(0.5, 1e-6);
        let mut passed = false;
        for j in 0..40 {
            let ok = hist_accuracy_check(1 << j, 0.01, 0.1, &pp);
            assert!(ok || !passed, "passed at a smaller k but failed at 2^{j}");
            passed |= ok;
        }
        assert!(passed);
    }
}
