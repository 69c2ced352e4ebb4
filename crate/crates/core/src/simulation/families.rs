//! Survival-time distributions and inverse-transform sampling.

use rand::Rng;
use rand::distr::{Distribution as _, Open01};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::SimError;

/// Parametric survival distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    /// Constant hazard `rate`.
    Exponential { rate: f64 },
    /// `S(t) = exp(-(t/scale)^shape)`.
    Weibull { shape: f64, scale: f64 },
    /// `ln T ~ N(mu, sigma^2)`.
    Lognormal { mu: f64, sigma: f64 },
    /// Hjorth's bathtub hazard: `S(t) = exp(-a t^2 / 2) / (1 + c t)^(b/c)`.
    Bathtub { a: f64, b: f64, c: f64 },
    /// Hazard `rate * exp(alpha t)`.
    Gompertz { rate: f64, alpha: f64 },
}

const ROOT_TOL: f64 = 1e-10;

impl Distribution {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            Distribution::Exponential { rate } => rate > 0.0,
            Distribution::Weibull { shape, scale } => shape > 0.0 && scale > 0.0,
            Distribution::Lognormal { sigma, mu } => sigma > 0.0 && mu.is_finite(),
            Distribution::Bathtub { a, b, c } => a >= 0.0 && b >= 0.0 && c > 0.0 && a + b > 0.0,
            Distribution::Gompertz { rate, alpha } => rate > 0.0 && alpha > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Scenario(format!("invalid parameters {self:?}")))
        }
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Distribution::Exponential { rate } => rate * t,
            Distribution::Weibull { shape, scale } => (t / scale).powf(shape),
            Distribution::Lognormal { .. } => -self.survival(t).ln(),
            Distribution::Bathtub { a, b, c } => 0.5 * a * t * t + (b / c) * (c * t).ln_1p(),
            Distribution::Gompertz { rate, alpha } => rate / alpha * (alpha * t).exp_m1(),
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            Distribution::Lognormal { mu, sigma } => {
                if t <= 0.0 {
                    1.0
                } else {
                    let z = (t.ln() - mu) / sigma;
                    Normal::standard().sf(z)
                }
            }
            _ => (-self.cumulative_hazard(t)).exp(),
        }
    }

    /// Time `T` with `S(T) = u`.
    pub fn quantile_survival(&self, u: f64) -> Result<f64, SimError> {
        let target = -u.ln();
        Ok(match *self {
            Distribution::Exponential { rate } => target / rate,
            Distribution::Weibull { shape, scale } => scale * target.powf(1.0 / shape),
            Distribution::Lognormal { mu, sigma } => {
                (mu + sigma * Normal::standard().inverse_cdf(1.0 - u)).exp()
            }
            Distribution::Gompertz { rate, alpha } => (alpha * target / rate).ln_1p() / alpha,
            Distribution::Bathtub { .. } => self.invert_hazard(target)?,
        })
    }

    /// Bracketed bisection on the increasing cumulative hazard.
    fn invert_hazard(&self, target: f64) -> Result<f64, SimError> {
        let mut hi = 1.0;
        let mut steps = 0;
        while self.cumulative_hazard(hi) < target {
            hi *= 2.0;
            steps += 1;
            if steps > 200 {
                return Err(SimError::RootFinding(format!("{self:?}: no bracket for H = {target}")));
            }
        }
        let mut lo = 0.0;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cumulative_hazard(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        if (self.cumulative_hazard(t) - target).abs() > ROOT_TOL * target.max(1.0) {
            return Err(SimError::RootFinding(format!(
                "{self:?}: H({t}) misses {target}"
            )));
        }
        Ok(t)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, SimError> {
        let u: f64 = Open01.sample(rng);
        self.quantile_survival(u)
    }
}
