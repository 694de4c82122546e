//! Exact rational helpers shared by every module.

use alloc::format;
use alloc::string::{String, ToString};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always kept in lowest terms.
pub type Q = BigRational;

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses an unsigned decimal numeral such as `4`, `4.0` or `3.25`.
///
/// A leading `-` is accepted so the same routine can be used for
/// command-line values and weight files. Fractions `p/q` are accepted as
/// well.
pub fn parse_decimal(text: &str) -> Option<Q> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let n = parse_decimal(num)?;
        let d = parse_decimal(den)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (whole, frac) = match mantissa.split_once('.') {
        Some((w, f)) => (w, f),
        None => (mantissa, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Q::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Q::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if negative { -value } else { value })
}

/// Exact decimal rendering when the denominator is of the form 2^a·5^b,
/// otherwise `p/q`.
pub fn format_exact(q: &Q) -> String {
    if q.is_integer() {
        return q.numer().to_string();
    }
    let mut den = q.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_multiple_of(&two) {
        den /= &two;
        twos += 1;
    }
    while den.is_multiple_of(&five) {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", q.numer(), q.denom());
    }
    let places = twos.max(fives);
    let scaled = q * Q::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = if digits.len() <= places {
        format!("{}{}", "0".repeat(places - digits.len() + 1), digits)
    } else {
        digits
    };
    let (w, f) = digits.split_at(digits.len() - places);
    let sign = if q.is_negative() { "-" } else { "" };
    format!("{sign}{w}.{f}")
}

/// `numerator/denominator` rendering used by JSON formats.
pub fn format_fraction(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn to_f64(q: &Q) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Huge operands: scale down before converting.
            let shift = q.denom().bits().max(q.numer().bits()).saturating_sub(1000);
            let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

pub fn to_usize(q: &Q) -> Option<usize> {
    if q.is_integer() && !q.is_negative() {
        q.to_integer().to_usize()
    } else {
        None
    }
}

pub fn abs(q: &Q) -> Q {
    q.abs()
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_decimal("3.25"), Some(ratio(13, 4)));
        assert_eq!(parse_decimal("-0.1"), Some(ratio(-1, 10)));
        assert_eq!(parse_decimal("4"), Some(int(4)));
        assert_eq!(parse_decimal("21/4"), Some(ratio(21, 4)));
        assert_eq!(parse_decimal("1e-2"), Some(ratio(1, 100)));
        assert_eq!(parse_decimal("."), None);
        assert_eq!(parse_decimal("1.2.3"), None);
        assert_eq!(parse_decimal("1/0"), None);
    }

    #[test]
    fn exact_formatting() {
        assert_eq!(format_exact(&ratio(21, 4)), "5.25");
        assert_eq!(format_exact(&ratio(3, 32)), "0.09375");
        assert_eq!(format_exact(&ratio(-13, 4)), "-3.25");
        assert_eq!(format_exact(&ratio(1, 3)), "1/3");
        assert_eq!(format_exact(&int(-7)), "-7");
        assert_eq!(format_exact(&ratio(-1, 20)), "-0.05");
    }
}
