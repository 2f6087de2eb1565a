//! Laplace distribution with location 0.
//!
//! Samples use the inverse CDF applied to one 64-bit draw mapped to the open
//! interval `(0, 1)` as `((bits >> 11) + 0.5) / 2^53`, so a replay with the
//! same generator reproduces every noise value bit for bit.

use rand::RngCore;

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Inverse CDF of `Lap(b)` at `u ∈ (0, 1)`.
pub fn inverse_cdf(u: f64, b: f64) -> f64 {
    if u < 0.5 {
        b * (2.0 * u).ln()
    } else {
        -b * (2.0 * (1.0 - u)).ln()
    }
}

pub fn sample<R: RngCore + ?Sized>(rng: &mut R, b: f64) -> f64 {
    inverse_cdf(open_unit(rng.next_u64()), b)
}

/// `Pr[Lap(b) ≤ x]`.
pub fn cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// `Pr[Lap(b) > x]`, accurate in both tails.
pub fn survival(x: f64, b: f64) -> f64 {
    if x >= 0.0 {
        0.5 * (-x / b).exp()
    } else {
        1.0 - 0.5 * (x / b).exp()
    }
}
