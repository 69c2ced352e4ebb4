//! Exponential censoring rate hitting a target censored fraction.

use rand::distr::{Distribution as _, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::generate::Generator;
use crate::error::SimError;

/// Pilot sample size.
pub const PILOT_SUBJECTS: usize = 10_000;
const PILOT_SEED: u64 = 0x00C0_FFEE_CA11_B8A7;
const ACCURACY: f64 = 0.01;

/// Fraction of pilot subjects censored at rate `lambda`: a subject with residual time `r`
/// and censoring delay `-ln(v) / lambda` is censored when the delay is shorter.
fn censored_fraction(thresholds: &[f64], lambda: f64) -> f64 {
    thresholds.iter().filter(|&&w| w < lambda).count() as f64 / thresholds.len() as f64
}

/// Rate of the exponential delay `D` (with `C = L + D`) whose censored fraction on a fixed
/// pilot sample is within 0.01 of `target`. A target of 0 returns 0, meaning no censoring.
///
/// The pilot fraction is a step function of the rate that jumps at `-ln(v_i) / r_i`, so
/// bisection on `ln λ` converges onto the interval between two consecutive jumps.
pub fn calibrate_censoring(generator: &Generator, target: f64) -> Result<f64, SimError> {
    if target == 0.0 {
        return Ok(0.0);
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(SimError::Calibration(format!("target {target} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED);
    let mut thresholds = Vec::with_capacity(PILOT_SUBJECTS);
    for _ in 0..PILOT_SUBJECTS {
        let s = generator.draw_subject(&mut rng)?;
        let v: f64 = Open01.sample(&mut rng);
        thresholds.push(-v.ln() / s.residual());
    }
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    if censored_fraction(&thresholds, lo.exp()) > target || censored_fraction(&thresholds, hi.exp()) < target {
        return Err(SimError::Calibration(format!(
            "{}: target {target} not bracketed by rates in [e^-30, e^30]",
            generator.spec().name
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored_fraction(&thresholds, mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (f_lo, f_hi) = (
        censored_fraction(&thresholds, lo.exp()),
        censored_fraction(&thresholds, hi.exp()),
    );
    let (rate, got) = if (f_lo - target).abs() <= (f_hi - target).abs() {
        (lo.exp(), f_lo)
    } else {
        (hi.exp(), f_hi)
    };
    if (got - target).abs() > ACCURACY {
        return Err(SimError::Calibration(format!(
            "{}: pilot censored fraction {got} misses target {target}",
            generator.spec().name
        )));
    }
    Ok(rate)
}
