//! Floating-point abstraction shared by the estimators, trees and metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for times, scores and rates. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent finite literals,
    /// which never happens for the implemented types.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// `x * ln(x)` with the continuous extension `0 * ln 0 = 0`.
    fn xlogx(self) -> Self {
        if self == Self::zero() {
            Self::zero()
        } else {
            self * self.ln()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
