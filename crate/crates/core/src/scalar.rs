use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point element type accepted by the numerical modules.
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
    /// Lossy conversion from a literal; panics only for values the type cannot hold.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `ln(sigmoid(x))` without overflow for large |x|.
    fn log_sigmoid(self) -> Self {
        if self >= Self::zero() {
            -(-self).exp().ln_1p()
        } else {
            self - self.exp().ln_1p()
        }
    }

    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_saturates_without_overflow() {
        // sigma(50) rounds to 1 in f64; its complement must stay representable.
        assert_eq!(50.0f64.sigmoid(), 1.0);
        let tail = (-50.0f64).sigmoid();
        assert!(tail > 0.0 && tail < 1e-20);
        assert!((-800.0f64).sigmoid() >= 0.0);
        assert!((-800.0f64).log_sigmoid().is_finite());
        assert!((800.0f64).log_sigmoid().abs() < 1e-300);
        assert_eq!(0.0f32.sigmoid(), 0.5);
    }

    #[test]
    fn log_sigmoid_matches_direct_formula() {
        for &x in &[-5.0f64, -0.3, 0.0, 0.7, 4.0] {
            let direct = (1.0 / (1.0 + (-x).exp())).ln();
            assert!((x.log_sigmoid() - direct).abs() < 1e-14);
        }
    }
}
