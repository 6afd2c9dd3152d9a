//! Numeric abstraction shared by the math-heavy modules.
//!
//! Training runs in `f32`; gradient checks and the projection algebra run in
//! `f64`. Everything that is not tied to a file format is written against
//! [`Scalar`] so both instantiations come from the same code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in generic code go through here.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    fn count(value: usize) -> Self {
        Self::lit(value as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
