//! Scalar abstraction for the generic linear-algebra core.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the dense linear-algebra layer.
///
/// Implemented for `f32` and `f64`. Crate-level type aliases pin the
/// engine itself to `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Conversion from an `f64` constant or tolerance.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 constant representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
