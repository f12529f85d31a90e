//! Scalar abstraction: every numerical routine in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`. The trait extends the num-traits
//! float surface with infallible f64 conversions (for literals and reporting)
//! and with the handful of random draws the samplers need, so that call sites
//! carry a single bound.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::{Product, Sum};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};

pub trait Real:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Product
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an f64 literal, rounding to the nearest representable value.
    fn of(x: f64) -> Self;

    /// Widens to f64 for reporting and for f64-only special functions.
    fn as_f64(self) -> f64;

    /// Draw from the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw a standard normal.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw a standard (rate 1) exponential.
    fn std_exp<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw Gamma(shape, scale); both must be positive and finite.
    fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn std_exp<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            #[inline]
            fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
                Gamma::new(shape, scale)
                    .expect("gamma parameters must be positive and finite")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(1.5), 1.5f32);
        assert_eq!(1.5f64.as_f64(), 1.5);
    }

    #[test]
    fn draws_are_in_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u: f64 = Real::open01(&mut rng);
            assert!(u > 0.0 && u < 1.0);
            let e: f64 = Real::std_exp(&mut rng);
            assert!(e >= 0.0);
            let g: f64 = Real::gamma(&mut rng, 2.0, 0.5);
            assert!(g > 0.0);
        }
    }
}
