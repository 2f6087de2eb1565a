//! Exponential mechanism over a finite list of hypotheses, scored by the
//! number of mistakes on the input sample.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::concept::{mistakes, unit_f64, Hypothesis, Sample};
use crate::error::{invalid, Error, Result};

/// Output law `p(h) ∝ exp(−ε·n·loss_S(h)/2)` in closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmDistribution {
    pub support: Vec<Hypothesis>,
    pub probabilities: Vec<f64>,
    /// Natural logs of `probabilities`, computed without exponentiating.
    pub log_probabilities: Vec<f64>,
}

impl EmDistribution {
    /// Index drawn by inverse CDF on one 64-bit uniform.
    pub fn sample_index<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u = unit_f64(rng.next_u64());
        let mut acc = 0.0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> &Hypothesis {
        &self.support[self.sample_index(rng)]
    }
}

/// Normalizes scores `−ε·mistakes/2` after subtracting the maximum.
pub(crate) fn em_from_mistakes(
    support: Vec<Hypothesis>,
    counts: &[usize],
    epsilon: f64,
) -> EmDistribution {
    let scores: Vec<f64> = counts.iter().map(|&c| -epsilon * c as f64 / 2.0).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let log_total = total.ln();
    EmDistribution {
        support,
        probabilities: weights.iter().map(|w| w / total).collect(),
        log_probabilities: scores.iter().map(|s| s - max - log_total).collect(),
    }
}

pub fn em_exact_distribution(
    hs: &[Hypothesis],
    s: &Sample,
    epsilon: f64,
) -> Result<EmDistribution> {
    if hs.is_empty() {
        return Err(invalid(
            "hypotheses",
            "exponential mechanism needs a nonempty list",
        ));
    }
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(
            "epsilon",
            format!("{epsilon} must be positive and finite"),
        ));
    }
    let domain_size = hs[0].domain_size();
    if let Some(h) = hs.iter().find(|h| h.domain_size() != domain_size) {
        return Err(Error::DomainMismatch {
            expected: domain_size,
            found: h.domain_size(),
        });
    }
    if let Some(e) = s.examples().iter().find(|e| e.point.0 >= domain_size) {
        return Err(Error::PointOutOfDomain {
            point: e.point.0,
            domain_size,
        });
    }
    let counts: Vec<usize> = hs.iter().map(|h| mistakes(h, s.examples())).collect();
    Ok(em_from_mistakes(hs.to_vec(), &counts, epsilon))
}

/// One draw from the exponential mechanism; `ε`-DP in `S`.
pub fn generic_learner<R: RngCore + ?Sized>(
    hs: &[Hypothesis],
    s: &Sample,
    epsilon: f64,
    rng: &mut R,
) -> Result<Hypothesis> {
    Ok(em_exact_distribution(hs, s, epsilon)?.sample(rng).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::{Label, LabeledExample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h(signs: &[i8]) -> Hypothesis {
        Hypothesis::from_signs(signs).unwrap()
    }

    fn sample(pairs: &[(usize, i8)]) -> Sample {
        pairs
            .iter()
            .map(|&(x, y)| LabeledExample::new(x, Label::try_from(y).unwrap()))
            .collect()
    }

    #[test]
    fn equal_losses_give_uniform() {
        let hs = [h(&[1, 1]), h(&[-1, 1]), h(&[1, -1])];
        let s = sample(&[(0, 1), (0, -1)]);
        let d = em_exact_distribution(&hs, &s, 1.0).unwrap();
        for p in &d.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_hypotheses_closed_form() {
        let hs = [h(&[1, 1]), h(&[-1, -1])];
        let s = sample(&[(0, 1), (1, 1)]);
        let d = em_exact_distribution(&hs, &s, 1.0).unwrap();
        let e = (-1f64).exp();
        assert!((d.probabilities[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((d.probabilities[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((d.probabilities[0] - 0.731).abs() < 5e-4);
        for (p, lp) in d.probabilities.iter().zip(&d.log_probabilities) {
            assert!((p.ln() - lp).abs() < 1e-14);
        }
    }

    #[test]
    fn singleton_is_certain() {
        let hs = [h(&[1, -1])];
        let s = sample(&[(0, -1)]);
        let d = em_exact_distribution(&hs, &s, 0.5).unwrap();
        assert_eq!(d.probabilities, vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(generic_learner(&hs, &s, 0.5, &mut rng).unwrap(), hs[0]);
    }

    #[test]
    fn perfect_hypothesis_dominates() {
        let hs = [h(&[1, 1]), h(&[-1, 1]), h(&[-1, -1])];
        let s: Sample = (0..200)
            .map(|_| LabeledExample::new(0, Label::Pos))
            .collect();
        let d = em_exact_distribution(&hs, &s, 1.0).unwrap();
        assert!(d.probabilities[0] >= 1.0 - 3.0 * (-100f64).exp());
    }

    #[test]
    fn huge_scores_do_not_underflow_to_nan() {
        let hs = [h(&[1]), h(&[-1])];
        let s: Sample = (0..100_000)
            .map(|_| LabeledExample::new(0, Label::Pos))
            .collect();
        let d = em_exact_distribution(&hs, &s, 1.0).unwrap();
        assert_eq!(d.probabilities[0], 1.0);
        assert!((d.log_probabilities[1] + 50_000.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_empty_inputs() {
        let s = sample(&[(0, 1)]);
        assert!(em_exact_distribution(&[], &s, 1.0).is_err());
        assert!(em_exact_distribution(&[h(&[1])], &Sample::new(), 1.0).is_err());
    }
}
