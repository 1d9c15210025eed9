//! Scalar abstractions shared by the symbolic and numeric layers.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{FromPrimitive, ToPrimitive};

use crate::Rational;

/// Floating-point scalars the numeric layer runs on.
pub trait Real: num_traits::Float + FromPrimitive + Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

pub fn from_rational<T: Real>(r: &Rational) -> T {
    let v = ToPrimitive::to_f64(r).unwrap_or_else(|| {
        // huge numerators or denominators
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    });
    T::from_f64(v).unwrap_or_else(T::nan)
}

/// A field of polynomial coefficients: exact rationals or floats.
pub trait Field: Clone + PartialEq + Debug + num_traits::Num + Neg<Output = Self> {
    fn from_rational(r: &Rational) -> Self;
    fn as_f64(&self) -> f64;
    /// Exact zero for rationals; a tight absolute threshold for floats.
    fn is_negligible(&self) -> bool;
}

impl Field for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_negligible(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

impl Field for f64 {
    fn from_rational(r: &Rational) -> Self {
        from_rational::<f64>(r)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn is_negligible(&self) -> bool {
        self.abs() < 1e-14
    }
}

/// Best rational with denominator at most `max_den` within `tol` of `x`.
pub fn recognize_rational(x: f64, max_den: i64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    for d in 1..=max_den {
        let n = (x * d as f64).round();
        if (n / d as f64 - x).abs() <= tol {
            return Some(Rational::new((n as i64).into(), d.into()));
        }
    }
    None
}

/// Exact dyadic value of an `f64`.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}
