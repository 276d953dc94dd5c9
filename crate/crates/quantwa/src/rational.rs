//! Helpers around arbitrary-precision rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Parses `p/q`, an integer, or a decimal literal such as `-0.125` or `1e-3`
/// into an exact rational.
pub fn parse(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{whole}{frac}").parse().unwrap_or_else(|_| BigInt::zero());
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(all);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Canonical text form: `n` for integers, `n/d` otherwise.
pub fn format(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Largest multiple of `step` that does not exceed `x`, as a multiple count.
pub fn floor_steps(x: &Rational, step: &Rational) -> BigInt {
    (x / step).floor().to_integer()
}

/// The rational with the smallest denominator in `[lo, hi]`, smallest in
/// absolute value among those.
pub fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    assert!(lo <= hi, "empty interval");
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    if !lo.is_positive() {
        return Rational::zero();
    }
    let fl = lo.floor();
    if fl == *lo {
        return fl;
    }
    let next = &fl + Rational::one();
    if next <= *hi {
        return next;
    }
    let inner = simplest_between(&(hi - &fl).recip(), &(lo - &fl).recip());
    fl + inner.recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse("1/100"), Some(ratio(1, 100)));
        assert_eq!(parse("-3"), Some(int(-3)));
        assert_eq!(parse("0.125"), Some(ratio(1, 8)));
        assert_eq!(parse("1e-3"), Some(ratio(1, 1000)));
        assert_eq!(parse("-2.5E1"), Some(int(-25)));
        assert_eq!(parse(".5"), Some(ratio(1, 2)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("abc"), None);
        assert_eq!(parse(""), None);
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format(&ratio(2, 4)), "1/2");
        assert_eq!(format(&int(-7)), "-7");
        assert_eq!(format(&ratio(3, -6)), "-1/2");
    }

    #[test]
    fn floor_steps_rounds_down() {
        assert_eq!(floor_steps(&ratio(7, 10), &ratio(1, 4)), BigInt::from(2));
        assert_eq!(floor_steps(&ratio(-1, 10), &ratio(1, 4)), BigInt::from(-1));
    }

    #[test]
    fn simplest_rational_in_an_interval() {
        assert_eq!(simplest_between(&ratio(3, 10), &ratio(7, 20)), ratio(1, 3));
        assert_eq!(simplest_between(&ratio(-7, 20), &ratio(-3, 10)), ratio(-1, 3));
        assert_eq!(simplest_between(&ratio(-1, 2), &ratio(1, 2)), int(0));
        assert_eq!(simplest_between(&ratio(5, 2), &ratio(7, 2)), int(3));
        assert_eq!(simplest_between(&ratio(5, 17), &ratio(5, 17)), ratio(5, 17));
        let (lo, hi) = (ratio(3141, 1000), ratio(3142, 1000));
        let x = simplest_between(&lo, &hi);
        assert!(lo <= x && x <= hi);
        assert_eq!(x, ratio(245, 78));
    }
}
