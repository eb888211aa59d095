//! Scalar abstractions shared by the measure and tree code.
//!
//! [`Scalar`] needs only field operations and an ordering, so it covers
//! `f32`, `f64` and exact rationals. Anything that takes logarithms or
//! exponentials asks for [`Real`] instead.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + Send + Sync + 'static {
    /// Absolute slack allowed when validating sums and conservation laws.
    fn tolerance() -> Self;

    fn to_f64_lossy(&self) -> f64;

    fn from_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits scalar")
    }

    /// `self^(-k)`, by repeated division so exact types stay exact.
    fn inv_pow(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc / self.clone();
        }
        acc
    }

    fn pow(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
    fn inv_pow(&self, k: usize) -> Self {
        self.powi(-(k as i32))
    }
    fn pow(&self, k: usize) -> Self {
        self.powi(k as i32)
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
    fn inv_pow(&self, k: usize) -> Self {
        self.powi(-(k as i32))
    }
    fn pow(&self, k: usize) -> Self {
        self.powi(k as i32)
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for Rational64 {
    fn tolerance() -> Self {
        Rational64::from_integer(0)
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Floating point scalars: f32 or f64.
pub trait Real: Scalar + Float + FloatConst {}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational from a decimal string such as `"0.25"` or `"3/8"`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{}{}", int, frac);
    let mut num: BigInt = digits.parse().ok()?;
    if neg {
        num = -num;
    }
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_parsing() {
        let q = parse_rational("0.25").unwrap();
        assert_eq!(q, BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("3/8").unwrap(), BigRational::new(3.into(), 8.into()));
        assert_eq!(parse_rational("-1.5").unwrap(), BigRational::new((-3).into(), 2.into()));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("abc").is_none());
    }

    #[test]
    fn exact_inverse_powers() {
        let beta = BigRational::new(3.into(), 2.into());
        assert_eq!(beta.inv_pow(3), BigRational::new(8.into(), 27.into()));
        assert_eq!(2.0f64.inv_pow(10), 2f64.powi(-10));
    }
}
