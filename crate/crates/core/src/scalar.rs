//! Numeric bound shared by every power/load computation.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for kilowatt quantities: `f32` or `f64`.
///
/// Times are always integer seconds; only power and the statistics derived
/// from it are generic.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used by config parsing and statistics.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    fn of_u64(value: u64) -> Self {
        Self::from_u64(value).expect("u64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
