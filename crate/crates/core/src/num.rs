//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar usable by the outranking, moment and polygon kernels.
///
/// Implemented for `f32` and `f64`. Kernels that need dense symmetric
/// eigen-decompositions additionally require [`nalgebra::RealField`].
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Scalar that also supports nalgebra's dense decompositions.
///
/// Both `num_traits::Float` and `nalgebra::RealField` define `sqrt`, `abs`
/// and friends; call them as `Float::sqrt(x)` where both bounds are in scope.
pub trait LinalgScalar: Scalar + nalgebra::RealField + Copy {}

impl<T: Scalar + nalgebra::RealField + Copy> LinalgScalar for T {}
