//! Confidence intervals used by statistical checks.

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_9;

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes >= trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

pub fn wilson99(successes: u64, trials: u64) -> (f64, f64) {
    wilson(successes, trials, Z99)
}

/// Half-width `t` with `Pr[|mean − μ| ≥ t] ≤ 1 − confidence` for `n`
/// samples in an interval of length `range`.
pub fn hoeffding_slack(n: u64, range: f64, confidence: f64) -> f64 {
    range * ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt()
}

/// Mean and unbiased standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson99(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson99(0, 100).0, 0.0);
        assert_eq!(wilson99(100, 100).1, 1.0);
        let (lo, hi) = wilson99(5000, 10_000);
        assert!((hi - lo - 2.0 * Z99 * 0.005).abs() < 1e-4);
    }

    #[test]
    fn hoeffding_shrinks() {
        assert!(hoeffding_slack(100, 1.0, 0.99) > hoeffding_slack(10_000, 1.0, 0.99));
        assert!((hoeffding_slack(200, 1.0, 0.99) - (200f64.ln() / 400.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mean_std_basic() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }
}
