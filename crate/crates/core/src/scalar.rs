//! Scalar abstraction shared by every numerical routine.
//!
//! Geometry and layer code is written once against [`Real`] and instantiated
//! with plain floats (`f64`, `f32`) for evaluation or with the tape-backed
//! [`Var`](crate::autograd::Var) for reverse-mode differentiation. Branching
//! decisions (clamps, small-angle cut-offs) always look at [`Real::value`], so
//! every instantiation takes the same path for the same inputs.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, NumCast};

pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Lift a constant. For tracked scalars the result carries no derivative.
    fn cst(v: f64) -> Self;

    /// Primal value as `f64`.
    fn value(self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn cosh(self) -> Self;
    fn sinh(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn relu(self) -> Self;

    /// `acosh(1 + max(self, 0))`.
    ///
    /// Taking the offset from one keeps full precision for nearly coincident
    /// points. The derivative is reported as zero where the clamp is active
    /// and at the singular point `self == 0`. NaN propagates.
    fn acosh1p(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }

    fn square(self) -> Self {
        self * self
    }

    /// Σ aᵢ bᵢ in index order.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = Self::zero();
        for (&x, &y) in a.iter().zip(b) {
            acc = acc + x * y;
        }
        acc
    }

    /// Σ aᵢ in index order.
    fn sum(a: &[Self]) -> Self {
        a.iter().fold(Self::zero(), |acc, &x| acc + x)
    }
}

fn acosh1p_f64(d: f64) -> f64 {
    // clamp without swallowing NaN
    let d = if d < 0.0 { 0.0 } else { d };
    (d + (d * (d + 2.0)).sqrt()).ln_1p()
}

macro_rules! impl_real_float {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn cst(v: f64) -> Self {
                <$t as NumCast>::from(v).expect("finite constant")
            }
            #[inline]
            fn value(self) -> f64 {
                self as f64
            }
            #[inline]
            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            #[inline]
            fn exp(self) -> Self {
                Float::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                Float::ln(self)
            }
            #[inline]
            fn cosh(self) -> Self {
                Float::cosh(self)
            }
            #[inline]
            fn sinh(self) -> Self {
                Float::sinh(self)
            }
            #[inline]
            fn tanh(self) -> Self {
                Float::tanh(self)
            }
            #[inline]
            fn sigmoid(self) -> Self {
                let one: $t = 1.0;
                one / (one + Float::exp(-self))
            }
            #[inline]
            fn relu(self) -> Self {
                if self > 0.0 {
                    self
                } else {
                    0.0
                }
            }
            #[inline]
            fn acosh1p(self) -> Self {
                let d: $t = if self < 0.0 { 0.0 } else { self };
                Float::ln_1p(d + Float::sqrt(d * (d + 2.0)))
            }
        }
    };
}

impl_real_float!(f64);
impl_real_float!(f32);

/// Derivative of [`Real::acosh1p`] with the singular-point convention applied.
pub(crate) fn acosh1p_derivative(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / (d * (d + 2.0)).sqrt()
    } else {
        0.0
    }
}

pub(crate) fn acosh1p_value(d: f64) -> f64 {
    acosh1p_f64(d)
}

pub(crate) fn sigmoid_value(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Lift a slice of constants.
pub fn lift<T: Real>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::cst(x)).collect()
}

/// Primal values of a slice.
pub fn values<T: Real>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acosh1p_propagates_nan() {
        assert!(f64::NAN.acosh1p().is_nan());
        assert!(f32::NAN.acosh1p().is_nan());
        assert_eq!((-1e-17f64).acosh1p(), 0.0);
    }

    #[test]
    fn acosh1p_matches_std_acosh() {
        for &a in &[1.0f64, 1.5, 2.0, 10.0, 1e6] {
            let got = (a - 1.0).acosh1p();
            assert!((got - a.acosh()).abs() <= 1e-12 * a.acosh().max(1.0));
        }
    }

    #[test]
    fn acosh1p_clamps_negative_offsets() {
        assert_eq!((-1e-14f64).acosh1p(), 0.0);
        assert_eq!(acosh1p_derivative(-1.0), 0.0);
        assert_eq!(acosh1p_derivative(0.0), 0.0);
    }

    #[test]
    fn f32_instantiation_agrees_with_f64() {
        let x32 = 0.75f32;
        let x64 = 0.75f64;
        assert!((x32.sigmoid().value() - x64.sigmoid()).abs() < 1e-6);
        assert!((x32.acosh1p().value() - x64.acosh1p()).abs() < 1e-6);
        assert_eq!(f32::dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }
}
