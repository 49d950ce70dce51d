//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used by the embedding, clustering, evaluation and metric code.
///
/// Implemented for `f32` and `f64`. Everything that is persisted or compared
/// byte-for-byte runs on `f64`; `f32` is there for cheap experimentation.
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
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance. Panics in debug builds on a length mismatch.
#[inline]
pub fn squared_distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[inline]
pub fn distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    squared_distance(a, b).sqrt()
}

/// Cast a slice of `f64` into another scalar type.
pub fn cast_slice<F: Scalar>(xs: &[f64]) -> Vec<F> {
    xs.iter().map(|&x| F::of(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_matches_both_precisions() {
        let a = [0.0, 3.0];
        let b = [4.0, 0.0];
        assert_eq!(distance::<f64>(&a, &b), 5.0);
        let a32: Vec<f32> = cast_slice(&a);
        let b32: Vec<f32> = cast_slice(&b);
        assert_eq!(distance(&a32, &b32), 5.0f32);
    }
}
