//! Floating-point values with an explicit binary exponent.
//!
//! `I_n(x)` underflows and `K_n(x)` overflows long before their product
//! leaves the ordinary `f64` range (n = 90, x = 3 gives roughly 1e-120 and
//! 1e+116). Every Bessel value is therefore carried as a normalized mantissa
//! in `[1, 2)` together with an `i64` power-of-two exponent, and only the
//! O(1) products are demoted with [`ScaledValue::to_f64`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

const EXP_MASK: u64 = 0x7ff << 52;
const EXP_BIAS: i64 = 1023;
const MANTISSA_BITS: i64 = 52;

/// `sign * mantissa * 2^exponent`, with `|mantissa|` in `[1, 2)` or exactly zero.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaledValue {
    mantissa: f64,
    exponent: i64,
}

/// Splits a finite nonzero `x` into `(m, e)` with `|m|` in `[1, 2)`.
fn split(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let biased = ((bits & EXP_MASK) >> MANTISSA_BITS) as i64;
    if biased == 0 {
        // subnormal: lift into the normal range first
        let (m, e) = split(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !EXP_MASK) | ((EXP_BIAS as u64) << MANTISSA_BITS));
    (m, biased - EXP_BIAS)
}

/// `2^e` for `e` in the normal exponent range.
fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + EXP_BIAS) as u64) << MANTISSA_BITS)
}

/// `m * 2^e` without intermediate overflow; saturates to `±inf` / `±0`.
fn ldexp(m: f64, e: i64) -> f64 {
    if e > 1023 {
        if e > 2100 {
            return m * f64::INFINITY;
        }
        return ldexp(m * pow2(1023), e - 1023);
    }
    if e < -1022 {
        if e < -2200 {
            return m * 0.0;
        }
        return ldexp(m * pow2(-1022), e + 1022);
    }
    m * pow2(e)
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue { mantissa: 0.0, exponent: 0 };
    pub const ONE: ScaledValue = ScaledValue { mantissa: 1.0, exponent: 0 };

    /// Wraps a finite `f64`. Non-finite input is a programming error.
    pub fn new(x: f64) -> Self {
        assert!(x.is_finite(), "ScaledValue::new called with {x}");
        if x == 0.0 {
            return Self::ZERO;
        }
        let (mantissa, exponent) = split(x);
        ScaledValue { mantissa, exponent }
    }

    /// Builds `m * 2^e` and renormalizes.
    pub fn from_parts(m: f64, e: i64) -> Self {
        let v = Self::new(m);
        if v.is_zero() {
            return v;
        }
        ScaledValue { mantissa: v.mantissa, exponent: v.exponent + e }
    }

    pub fn mantissa(self) -> f64 {
        self.mantissa
    }

    pub fn exponent(self) -> i64 {
        self.exponent
    }

    pub fn is_zero(self) -> bool {
        self.mantissa == 0.0
    }

    /// `-1`, `0` or `1`.
    pub fn signum(self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    pub fn abs(self) -> Self {
        ScaledValue { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    /// Demotes to a plain `f64`, saturating to `±inf` or `±0` when out of range.
    pub fn to_f64(self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        ldexp(self.mantissa, self.exponent)
    }

    /// Natural log of the magnitude. `-inf` for zero.
    pub fn ln_abs(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.abs().ln() + self.exponent as f64 * std::f64::consts::LN_2
    }

    /// Multiplies by `2^k` exactly.
    pub fn mul_pow2(self, k: i64) -> Self {
        if self.is_zero() {
            return self;
        }
        ScaledValue { mantissa: self.mantissa, exponent: self.exponent + k }
    }

    pub fn recip(self) -> Self {
        ScaledValue::ONE / self
    }
}

impl From<f64> for ScaledValue {
    fn from(x: f64) -> Self {
        ScaledValue::new(x)
    }
}

impl fmt::Debug for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mantissa, self.exponent)
    }
}

impl fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // decimal mantissa/exponent without going through f64
        let log10 = self.ln_abs() / std::f64::consts::LN_10;
        let e10 = log10.floor();
        let m10 = 10f64.powf(log10 - e10) * self.signum();
        write!(f, "{m10:.15}e{e10}")
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: ScaledValue) -> ScaledValue {
        if self.is_zero() || rhs.is_zero() {
            return ScaledValue::ZERO;
        }
        ScaledValue::from_parts(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Div for ScaledValue {
    type Output = ScaledValue;
    fn div(self, rhs: ScaledValue) -> ScaledValue {
        assert!(!rhs.is_zero(), "ScaledValue division by zero");
        if self.is_zero() {
            return ScaledValue::ZERO;
        }
        ScaledValue::from_parts(self.mantissa / rhs.mantissa, self.exponent - rhs.exponent)
    }
}

impl Mul<f64> for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: f64) -> ScaledValue {
        self * ScaledValue::new(rhs)
    }
}

impl Div<f64> for ScaledValue {
    type Output = ScaledValue;
    fn div(self, rhs: f64) -> ScaledValue {
        self / ScaledValue::new(rhs)
    }
}

impl Add for ScaledValue {
    type Output = ScaledValue;
    fn add(self, rhs: ScaledValue) -> ScaledValue {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exponent >= rhs.exponent { (self, rhs) } else { (rhs, self) };
        let shift = small.exponent - big.exponent;
        if shift < -60 {
            return big;
        }
        ScaledValue::from_parts(big.mantissa + small.mantissa * pow2(shift), big.exponent)
    }
}

impl Neg for ScaledValue {
    type Output = ScaledValue;
    fn neg(self) -> ScaledValue {
        ScaledValue { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl Sub for ScaledValue {
    type Output = ScaledValue;
    fn sub(self, rhs: ScaledValue) -> ScaledValue {
        self + (-rhs)
    }
}

impl PartialOrd for ScaledValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let diff = *self - *other;
        diff.mantissa.partial_cmp(&0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization() {
        let v = ScaledValue::new(12.0);
        assert_eq!(v.mantissa(), 1.5);
        assert_eq!(v.exponent(), 3);
        let v = ScaledValue::new(-0.75);
        assert_eq!(v.mantissa(), -1.5);
        assert_eq!(v.exponent(), -1);
        assert!(ScaledValue::new(0.0).is_zero());
    }

    #[test]
    fn subnormals_split_and_restore() {
        let x = f64::from_bits(1);
        let v = ScaledValue::new(x);
        assert_eq!(v.exponent(), -1074);
        assert_eq!(v.to_f64(), x);
    }

    #[test]
    fn products_beyond_f64_range() {
        let tiny = ScaledValue::new(1e-300) * ScaledValue::new(1e-300);
        let huge = ScaledValue::new(1e300) * ScaledValue::new(1e300);
        assert_eq!(tiny.to_f64(), 0.0);
        assert_eq!(huge.to_f64(), f64::INFINITY);
        let back = (tiny * huge).to_f64();
        assert!((back - 1.0).abs() < 1e-14);
    }

    #[test]
    fn huge_exponents_do_not_overflow() {
        let a = ScaledValue::from_parts(1.25, 1_000_000);
        let b = ScaledValue::from_parts(1.5, -1_000_000);
        let p = a * b;
        assert!((p.to_f64() - 1.875).abs() < 1e-15);
        let q = a / ScaledValue::from_parts(1.25, 999_999);
        assert_eq!(q.to_f64(), 2.0);
    }

    #[test]
    fn addition_aligns_exponents() {
        let a = ScaledValue::new(3.0);
        let b = ScaledValue::new(0.125);
        assert_eq!((a + b).to_f64(), 3.125);
        assert_eq!((b - a).to_f64(), -2.875);
        assert!((a - a).is_zero());
        let far = ScaledValue::from_parts(1.0, -500);
        assert_eq!((a + far).to_f64(), 3.0);
    }

    #[test]
    fn ordering() {
        let a = ScaledValue::from_parts(1.0, -2000);
        let b = ScaledValue::from_parts(1.0, -1999);
        assert!(a < b);
        assert!(-b < -a);
        assert!(ScaledValue::ZERO < a);
    }

    #[test]
    fn log_magnitude() {
        let v = ScaledValue::from_parts(1.0, 4000);
        assert!((v.ln_abs() - 4000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(ScaledValue::ZERO.ln_abs(), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(ScaledValue::new(x).to_f64(), x);
        }

        #[test]
        fn multiplication_matches_f64(a in -1e100f64..1e100, b in -1e100f64..1e100) {
            let exact = a * b;
            let scaled = (ScaledValue::new(a) * ScaledValue::new(b)).to_f64();
            prop_assert!((scaled - exact).abs() <= 1e-15 * exact.abs());
        }
    }
}
