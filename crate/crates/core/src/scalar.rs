use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for colors, distances, flow vectors and fuzzy values.
///
/// Implemented for `f32` and `f64`. Integer path costs in the forest engine do
/// not go through this trait.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every finite `f64` maps to some value.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 converts to any float scalar")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::lit(x as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
