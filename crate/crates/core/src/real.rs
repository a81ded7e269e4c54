//! Scalar abstraction so the integrator can run in `f64` or in double-double.

pub use crate::dd::DD;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn of(x: f64) -> Self;
    fn to_f(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Unit roundoff of the type.
    fn eps() -> f64;
    fn to_dd(self) -> DD;
    fn from_dd(x: DD) -> Self;
}

impl Real for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn of(x: f64) -> Self {
        x
    }
    fn to_f(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn eps() -> f64 {
        f64::EPSILON
    }
    fn to_dd(self) -> DD {
        DD::from_f64(self)
    }
    fn from_dd(x: DD) -> Self {
        x.to_f64()
    }
}

fn bigint_to_dd(z: &BigInt) -> DD {
    let hi = z.to_f64().unwrap_or(f64::NAN);
    if !hi.is_finite() {
        return DD::from(hi);
    }
    let exact: BigInt = num_traits::FromPrimitive::from_f64(hi).unwrap_or_else(BigInt::zero);
    let lo = (z - exact).to_f64().unwrap_or(0.0);
    DD::new(hi, lo)
}

impl Real for DD {
    fn zero() -> Self {
        DD::ZERO
    }
    fn one() -> Self {
        DD::ONE
    }
    fn of(x: f64) -> Self {
        DD::from_f64(x)
    }
    fn to_f(self) -> f64 {
        self.to_f64()
    }
    fn abs(self) -> Self {
        DD::abs(self)
    }
    fn sqrt(self) -> Self {
        DD::sqrt(self)
    }
    /// Nearest double for the high word, then the nearest double of the exact
    /// remainder, so that hi + lo written as a rational converts back unchanged.
    fn from_rational(r: &BigRational) -> Self {
        let hi = r.to_f64().unwrap_or(f64::NAN);
        if !hi.is_finite() {
            return bigint_to_dd(r.numer()) / bigint_to_dd(r.denom());
        }
        let lo = (r - rational_from_f64(hi)).to_f64().unwrap_or(0.0);
        DD::new(hi, lo)
    }
    fn eps() -> f64 {
        // 2^-104
        4.93e-32
    }
    fn to_dd(self) -> DD {
        self
    }
    fn from_dd(x: DD) -> Self {
        x
    }
}

/// Exact conversion of an f64 into a rational.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

pub fn to_f64_matrix<T: Real>(m: &DMatrix<T>) -> DMatrix<f64> {
    m.map(|x| x.to_f())
}

pub fn from_f64_matrix<T: Real>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(|x| T::of(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_to_dd_keeps_low_word() {
        let r = BigRational::new(BigInt::from(54), BigInt::from(5));
        let d = DD::from_rational(&r);
        let back = d * DD::from(5.0) - DD::from(54.0);
        assert!(back.to_f().abs() < 1e-29);
        let f = 54.0f64 / 5.0;
        assert!((DD::from(f) - d).to_f().abs() > 1e-17);
        let big = BigRational::new(BigInt::from(10).pow(40) + BigInt::from(1), BigInt::from(7));
        let v = DD::from_rational(&big);
        assert!(((v * DD::from(7.0)).hi - 1e40).abs() <= 1e25);
    }
}
