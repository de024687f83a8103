//! Scalar abstraction so the whole pipeline can run in `f32` (checkpoint
//! precision) or `f64` (verification precision).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar every numeric routine is generic over.
///
/// Implemented for `f32` and `f64`. The bounds are the union of what the
/// math, serialization, and parallel layers need.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into the working scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Widens to `f64`; metric accumulators always run in double precision.
    fn widen(self) -> f64 {
        self.to_f64().expect("scalar fits in f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for [`Scalar::of`] at call sites dense with constants.
pub fn lit<T: Scalar>(v: f64) -> T {
    T::of(v)
}
