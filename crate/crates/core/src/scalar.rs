//! Numeric traits shared by the generic parts of the crate.
//!
//! Two levels are used. [`Ring`] is enough to run the `G_n^m` recurrences and
//! the symbolic freezing step, so those also work over exact rationals.
//! [`Scalar`] adds the transcendental functions needed by quadrature and ODE
//! integration, and is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{Float, FromPrimitive, Num, NumCast, Signed};

/// Exact-or-approximate ring arithmetic with an ordering.
pub trait Ring:
    Num + Signed + Clone + PartialOrd + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).expect("integer representable in scalar")
    }

    fn to_f64_lossy(&self) -> f64;
}

impl Ring for f32 {
    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
}

impl Ring for f64 {
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Ring for Rational64 {
    fn to_f64_lossy(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar: Ring + Float + NumCast + Copy + Default {
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 representable in scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Pairwise (cascade) summation. Deterministic for a given slice order.
pub fn pairwise_sum<S: Scalar>(values: &[S]) -> S {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(S::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
