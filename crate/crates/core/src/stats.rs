//! Tail probabilities on the log scale.
//!
//! Split selection compares p-values that can underflow `f64` on strong signals, so the
//! tails are returned as natural logarithms with asymptotic expansions far out.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const TAIL_FLOOR: f64 = 1e-280;

/// `ln P(|Z| >= |z|)` for standard normal `Z`.
pub fn ln_normal_two_sided(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let p = erfc(x);
    if p > TAIL_FLOOR {
        return p.ln();
    }
    // erfc(x) ~ exp(-x^2)/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6))
    let x2 = x * x;
    let series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2);
    -x2 - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
}

/// `ln P(X >= x)` for `X` chi-square with `df` degrees of freedom.
pub fn ln_chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    let p = dist.sf(x);
    if p > TAIL_FLOOR {
        return p.ln();
    }
    // Q(a, y) ~ y^(a-1) e^-y / Gamma(a) * (1 + (a-1)/y + (a-1)(a-2)/y^2)
    let a = df / 2.0;
    let y = x / 2.0;
    let series = 1.0 + (a - 1.0) / y + (a - 1.0) * (a - 2.0) / (y * y);
    (a - 1.0) * y.ln() - y - ln_gamma(a) + series.ln()
}

/// Pearson goodness-of-fit p-value for equal cell probabilities.
pub fn chi_square_uniformity(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return 1.0;
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    ln_chi_square_sf(stat, (counts.len() - 1) as f64).exp()
}
