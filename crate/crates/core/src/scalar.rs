//! Integer scalar abstraction.
//!
//! Every time, size, weight, and cost in the crate is an exact integer. The
//! algorithms are written once against [`Scalar`] and instantiated with
//! [`num_bigint::BigInt`] (the default, see the aliases at the crate root) or
//! with a fixed-width type such as `i64` when the instance is known to be
//! small enough.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

/// Exact signed integer usable as a time / size / weight value.
pub trait Scalar:
    Integer
    + Signed
    + Clone
    + Debug
    + Display
    + FromStr
    + Hash
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    fn from_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize does not fit the scalar type")
    }

    fn pow2(exp: u32) -> Self {
        num_traits::pow(Self::one() + Self::one(), exp as usize)
    }
}

impl<T> Scalar for T where
    T: Integer
        + Signed
        + Clone
        + Debug
        + Display
        + FromStr
        + Hash
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Exact rational over a scalar.
pub type Rational<T> = Ratio<T>;

/// Sum a sequence of scalars.
pub fn sum<T: Scalar, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::zero(), |acc, x| acc + x)
}

/// `n`-th harmonic number as an exact rational.
pub fn harmonic<T: Scalar>(m: usize) -> Rational<T> {
    (1..=m).fold(Ratio::from_integer(T::zero()), |acc, i| {
        acc + Ratio::new(T::one(), <T as Scalar>::from_usize(i))
    })
}

/// Parse a rational from `a/b`, a decimal like `0.25`, or a plain integer.
pub fn parse_rational<T: Scalar>(s: &str) -> Option<Rational<T>> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: T = num.trim().parse().ok()?;
        let den: T = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Ratio::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_part: T = if int.is_empty() || int == "-" {
            T::zero()
        } else {
            int.parse().ok()?
        };
        let scale: T = num_traits::pow(<T as Scalar>::from_usize(10), frac.len());
        let frac_part: T = frac.parse().ok()?;
        let mut num = int_part.abs() * scale.clone() + frac_part;
        if neg {
            num = -num;
        }
        return Some(Ratio::new(num, scale));
    }
    s.parse().ok().map(Ratio::from_integer)
}

/// Render a rational as `num/den` (or just `num` when integral).
pub fn fmt_rational<T: Scalar>(r: &Rational<T>) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Lossy conversion for reporting only.
pub fn rational_to_f64<T: Scalar>(r: &Rational<T>) -> f64 {
    let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
    let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
    if n.is_finite() && d.is_finite() {
        return n / d;
    }
    // Huge terms: integer part plus 53 bits of fraction.
    let (q, rem) = r.numer().div_mod_floor(r.denom());
    let scale = T::pow2(53);
    let frac = (rem * scale.clone()) / r.denom().clone();
    q.to_f64().unwrap_or(f64::INFINITY) + frac.to_f64().unwrap_or(0.0) / scale.to_f64().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn parses_rational_forms() {
        let q: Rational<i64> = parse_rational("1/4").unwrap();
        assert_eq!(q, Ratio::new(1, 4));
        let q: Rational<i64> = parse_rational("0.25").unwrap();
        assert_eq!(q, Ratio::new(1, 4));
        let q: Rational<i64> = parse_rational("3").unwrap();
        assert_eq!(q, Ratio::from_integer(3));
        let q: Rational<i64> = parse_rational("-1.5").unwrap();
        assert_eq!(q, Ratio::new(-3, 2));
        assert!(parse_rational::<i64>("1/0").is_none());
        assert!(parse_rational::<i64>("x").is_none());
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic::<i64>(0), Ratio::from_integer(0));
        assert_eq!(harmonic::<i64>(3), Ratio::new(11, 6));
        let h: Rational<BigInt> = harmonic(4);
        assert_eq!(fmt_rational(&h), "25/12");
    }

    #[test]
    fn pow2_matches_shift() {
        assert_eq!(<i64 as Scalar>::pow2(10), 1024);
        assert_eq!(<BigInt as Scalar>::pow2(70), BigInt::from(1u128 << 70));
    }

    #[test]
    fn huge_ratio_converts() {
        let big = num_traits::pow(BigInt::from(10), 400);
        let r = Ratio::new(big.clone() * BigInt::from(3) + BigInt::from(1), big * BigInt::from(2));
        assert!((rational_to_f64(&r) - 1.5).abs() < 1e-12);
    }
}
