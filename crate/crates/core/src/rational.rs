//! Exact rational helpers: parsing, `p/q` formatting and integer square roots.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses an exact rational from `p`, `p/q` or a finite decimal such as `-0.25`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_int(num)?;
        let den = parse_int(den)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        if frac_part.len() > 60 {
            return Err(Error::Parse(format!("decimal too long {s:?}")));
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_val = if int_part == "-" || int_part == "+" || int_part.is_empty() {
            BigInt::zero()
        } else {
            parse_int(int_part)?
        };
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac: BigInt = frac_part.parse().map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let mag = int_val.abs() * &scale + frac;
        let num = if negative { -mag } else { mag };
        return Ok(Rational::new(num, scale));
    }
    Ok(Rational::from_integer(parse_int(s)?))
}

fn parse_int(s: &str) -> Result<BigInt> {
    let t = s.trim();
    let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
    if digits.is_empty() || digits.len() > 200 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad integer {s:?}")));
    }
    t.parse().map_err(|_| Error::Parse(format!("bad integer {s:?}")))
}

/// Parses a comma-separated list of rationals, e.g. `"3/5,4/5,1"`.
pub fn parse_rational_vector(s: &str) -> Result<Vec<Rational>> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    if s.trim().is_empty() {
        return Err(Error::Parse("empty vector".into()));
    }
    s.split(',').map(parse_rational).collect()
}

/// Always `p/q` with `q >= 1`, so integers print as `n/1`.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Serde adapter storing a rational as a `"p/q"` string.
pub mod pq {
    use super::{fmt_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Floor of the square root of a nonnegative integer.
pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    // correct the float estimate in both directions
    while x.checked_mul(x).is_none_or(|sq| sq > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|sq| sq <= n) {
        x += 1;
    }
    x
}

/// `Some(r)` with `r*r == n` when `n` is a perfect square.
pub fn exact_sqrt_u128(n: u128) -> Option<u128> {
    let r = isqrt_u128(n);
    (r * r == n).then_some(r)
}

/// Exact square root of a nonnegative rational if both parts are squares.
pub fn exact_sqrt_rational(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| Rational::new(n, d))
}

/// Least common multiple of the denominators (lowest terms).
pub fn lcm_denominators<'a>(it: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    use num_integer::Integer;
    it.into_iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_syntaxes() {
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert_eq!(parse_rational("-1/2").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational(" 4/6 ").unwrap(), rat(2, 3));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("-0.5").unwrap(), rat(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1.").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn vector_and_format() {
        let v = parse_rational_vector("3/5,4/5,1").unwrap();
        assert_eq!(v, vec![rat(3, 5), rat(4, 5), int(1)]);
        assert_eq!(fmt_rational(&int(25)), "25/1");
        assert_eq!(fmt_rational(&rat(-6, 4)), "-3/2");
    }

    #[test]
    fn square_roots() {
        assert_eq!(isqrt_u128(0), 0);
        assert_eq!(isqrt_u128(24), 4);
        assert_eq!(isqrt_u128(25), 5);
        assert_eq!(exact_sqrt_u128(1 << 100), Some(1 << 50));
        assert_eq!(exact_sqrt_u128(26), None);
        let big = (u64::MAX as u128) * (u64::MAX as u128);
        assert_eq!(isqrt_u128(big), u64::MAX as u128);
        assert_eq!(exact_sqrt_rational(&rat(9, 4)), Some(rat(3, 2)));
        assert_eq!(exact_sqrt_rational(&int(2)), None);
    }
}
