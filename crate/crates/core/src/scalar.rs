//! Scalar abstraction for the geometric core.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the geometry is generic over: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + core::fmt::Debug + core::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants and tolerances.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
