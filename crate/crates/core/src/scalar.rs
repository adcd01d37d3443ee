use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar used throughout the crate.
///
/// Bundles the numeric bounds the estimators need with a way to draw
/// standard-normal samples, so generic code never has to carry
/// `StandardNormal: Distribution<F>` bounds around.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Draws one sample from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Parses a scalar from its `Display` form.
    fn parse(text: &str) -> Option<Self>;

    /// Converts a count or dimension; counts in this crate stay far below
    /// the mantissa limit of either float width.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample(StandardNormal)
            }

            fn parse(text: &str) -> Option<Self> {
                text.parse().ok()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Dot product of two equal-length slices.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Squared Euclidean norm.
pub fn norm_sq<F: Scalar>(a: &[F]) -> F {
    dot(a, a)
}

/// `acc += x` elementwise.
pub fn add_assign<F: Scalar>(acc: &mut [F], x: &[F]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}
