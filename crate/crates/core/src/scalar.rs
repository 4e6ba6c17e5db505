//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All geometry is written against [`Real`], which is implemented for `f32`
//! and `f64` (and any other `nalgebra::RealField` that converts to `f64`).
//! The crate root exposes `f64` aliases for the common types.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Floating point scalar usable by the engine.
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {
    /// Convert an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Convert a count or index into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    /// Lossy conversion back to `f64` for serialization and reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where T: RealField + Copy + ToPrimitive + Send + Sync + 'static {}

/// Total order on scalars for sorting and heaps; NaN compares equal.
#[inline]
pub(crate) fn cmp<T: Real>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}
