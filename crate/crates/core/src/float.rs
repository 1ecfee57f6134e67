//! Scalar abstraction. All numeric kernels are generic over [`Float`],
//! implemented for `f32` and `f64`.

use ndarray::ScalarOperand;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

pub trait Float:
    num_traits::Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Draws a standard normal sample.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Float for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Float for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// Converts an `f64` constant to `T`.
///
/// Panics if the value has no representation in `T`; only used for
/// compile-time constants, never for data.
pub fn cast<T: Float>(v: f64) -> T {
    T::from_f64(v).expect("constant not representable in scalar type")
}
