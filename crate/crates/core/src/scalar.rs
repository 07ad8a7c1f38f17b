//! Coefficient arithmetic shared by the symbolic and numeric engines.
//!
//! Product identities are exact, so the symbolic side works over complex
//! numbers with arbitrary-precision rational parts ([`CExact`]). Matrix code
//! and experiment plumbing use double-precision complex ([`C64`]). Everything
//! downstream is generic over [`Scalar`] so both share one implementation.

use num::complex::Complex64;
use num::{BigInt, BigRational, Complex, One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Exact complex scalar: rational real and imaginary parts.
pub type CExact = Complex<BigRational>;

/// Double-precision complex scalar.
pub type C64 = Complex64;

/// Ring operations required of a coefficient type.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// Embeds a rational number as a (real) scalar.
    fn from_rational(r: &BigRational) -> Self;

    /// True for exact coefficient arithmetic, false for floating point.
    fn is_exact() -> bool;

    /// Lossy view as a double-precision complex number, for reporting.
    fn to_c64(&self) -> C64;

    /// Plain rendering: bare real part when the value is real, `a+bi`
    /// otherwise. Real rational output re-parses under the word grammar.
    fn render(&self) -> String;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn pow(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for CExact {
    fn from_rational(r: &BigRational) -> Self {
        Complex::new(r.clone(), BigRational::zero())
    }

    fn is_exact() -> bool {
        true
    }

    fn to_c64(&self) -> C64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    fn render(&self) -> String {
        format_exact(self)
    }
}

impl Scalar for C64 {
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(rational_to_f64(r), 0.0)
    }

    fn is_exact() -> bool {
        false
    }

    fn to_c64(&self) -> C64 {
        *self
    }

    fn render(&self) -> String {
        if self.im == 0.0 {
            format!("{}", self.re)
        } else {
            format!("{}{}{}i", self.re, if self.im < 0.0 { "" } else { "+" }, self.im)
        }
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale down big numerator/denominator pairs that overflow a direct cast.
    let (n, d) = (r.numer(), r.denom());
    let nf = bigint_to_f64(n);
    let df = bigint_to_f64(d);
    nf / df
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    use num::ToPrimitive;
    n.to_f64().unwrap_or(if n.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

/// Parses a real scalar literal: integers `-3`, fractions `5/2`, decimals `0.25`.
pub fn parse_big_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().ok()?;
        let d: BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let sign = if int_part.trim_start().starts_with('-') {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        let int_digits = int_part.trim().trim_start_matches(['-', '+']);
        let int_val: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().ok()?
        };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let frac_val: BigInt = frac_part.parse().ok()?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let magnitude = BigRational::from_integer(int_val)
            + BigRational::new(frac_val, scale);
        return Some(BigRational::from_integer(sign) * magnitude);
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

/// Renders an exact scalar: bare rational when real, `a+bi` otherwise.
pub fn format_exact(value: &CExact) -> String {
    if value.im.is_zero() {
        format!("{}", value.re)
    } else if value.re.is_zero() {
        format!("{}i", value.im)
    } else if value.im.is_negative() {
        format!("{}{}i", value.re, value.im)
    } else {
        format!("{}+{}i", value.re, value.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_big_rational("3").unwrap(), BigRational::from_integer(3.into()));
        assert_eq!(
            parse_big_rational("-5/2").unwrap(),
            BigRational::new((-5).into(), 2.into())
        );
        assert_eq!(
            parse_big_rational("0.25").unwrap(),
            BigRational::new(1.into(), 4.into())
        );
        assert_eq!(
            parse_big_rational("-1.5").unwrap(),
            BigRational::new((-3).into(), 2.into())
        );
        assert!(parse_big_rational("1/0").is_none());
        assert!(parse_big_rational("x").is_none());
    }

    #[test]
    fn exact_round_trip_to_f64() {
        let x = CExact::from_ratio(-7, 4);
        assert_eq!(x.to_c64(), Complex64::new(-1.75, 0.0));
    }

    #[test]
    fn pow_by_repeated_multiplication() {
        let x = CExact::from_i64(3);
        assert_eq!(x.pow(0), CExact::one());
        assert_eq!(x.pow(4), CExact::from_i64(81));
    }
}
