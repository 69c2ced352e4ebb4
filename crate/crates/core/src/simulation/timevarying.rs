//! Survival times under proportional hazards with a piecewise-constant time-varying term.
//!
//! The hazard is `h0(t) exp(lin + beta_z z(t))` with `z` constant between switch times.
//! Because each segment multiplies the baseline by a constant, the cumulative hazard is a
//! sum of scaled baseline increments and can be inverted segment by segment in closed form.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Baseline hazard of the time-varying generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Baseline {
    /// `h0(t) = rate`.
    Exponential { rate: f64 },
    /// `h0(t) = rate * shape * t^(shape - 1)`.
    Weibull { rate: f64, shape: f64 },
    /// `h0(t) = rate * exp(alpha t)`.
    Gompertz { rate: f64, alpha: f64 },
}

impl Baseline {
    pub fn hazard(&self, t: f64) -> f64 {
        match *self {
            Baseline::Exponential { rate } => rate,
            Baseline::Weibull { rate, shape } => rate * shape * t.powf(shape - 1.0),
            Baseline::Gompertz { rate, alpha } => rate * (alpha * t).exp(),
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Baseline::Exponential { rate } => rate * t,
            Baseline::Weibull { rate, shape } => rate * t.powf(shape),
            Baseline::Gompertz { rate, alpha } => rate / alpha * (alpha * t).exp_m1(),
        }
    }

    /// Inverse of [`Baseline::cumulative`].
    pub fn inverse_cumulative(&self, h: f64) -> f64 {
        match *self {
            Baseline::Exponential { rate } => h / rate,
            Baseline::Weibull { rate, shape } => (h / rate).powf(1.0 / shape),
            Baseline::Gompertz { rate, alpha } => (alpha * h / rate).ln_1p() / alpha,
        }
    }
}

/// Coefficients and baseline of the time-varying model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvParams {
    /// Coefficient of the fixed indicator.
    pub beta: f64,
    /// Coefficient of the time-varying indicator.
    pub beta_z: f64,
    pub baseline: Baseline,
}

impl TvParams {
    pub fn exponential() -> Self {
        TvParams {
            beta: 0.8,
            beta_z: 1.4,
            baseline: Baseline::Exponential { rate: 0.1 },
        }
    }

    pub fn weibull() -> Self {
        TvParams {
            beta: 0.9,
            beta_z: 1.6,
            baseline: Baseline::Weibull {
                rate: 0.3,
                shape: 0.8,
            },
        }
    }

    pub fn gompertz() -> Self {
        TvParams {
            beta: 1.2,
            beta_z: 2.0,
            baseline: Baseline::Gompertz {
                rate: 0.2,
                alpha: 0.1,
            },
        }
    }
}

/// Cumulative hazard at `t` for segments `(start, z)`; the first start must be 0.
pub fn path_cumulative_hazard(
    baseline: &Baseline,
    lin: f64,
    beta_z: f64,
    path: &[(f64, f64)],
    t: f64,
) -> f64 {
    let mut total = 0.0;
    for (k, &(start, z)) in path.iter().enumerate() {
        if t <= start {
            break;
        }
        let end = path.get(k + 1).map_or(t, |next| next.0.min(t));
        total += (lin + beta_z * z).exp() * (baseline.cumulative(end) - baseline.cumulative(start));
    }
    total
}

/// First `t` with cumulative hazard `-ln u` along the path `(start, z)`.
pub fn piecewise_ph_invert(
    baseline: &Baseline,
    lin: f64,
    beta_z: f64,
    path: &[(f64, f64)],
    u: f64,
) -> Result<f64, SimError> {
    if path.first().is_none_or(|p| p.0 != 0.0) {
        return Err(SimError::Scenario("covariate path must start at time 0".into()));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(SimError::Scenario(format!("uniform draw {u} outside (0, 1)")));
    }
    let target = -u.ln();
    let mut acc = 0.0;
    for (k, &(start, z)) in path.iter().enumerate() {
        let m = (lin + beta_z * z).exp();
        let h_start = baseline.cumulative(start);
        let t = baseline.inverse_cumulative(h_start + (target - acc) / m);
        match path.get(k + 1) {
            Some(&(next, _)) if t >= next => {
                acc += m * (baseline.cumulative(next) - h_start);
            }
            _ => return Ok(t.max(start)),
        }
    }
    unreachable!("the last segment is unbounded")
}
