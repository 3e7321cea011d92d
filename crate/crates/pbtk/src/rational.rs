//! Exact rational arithmetic helpers.
//!
//! Scores, budgets, prices and metrics are kept as arbitrary-precision
//! rationals end-to-end; floats appear only at report emission and inside
//! the MDS embedding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// The rational number type used throughout the crate.
pub type Rat = BigRational;

/// Integer as a rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Unsigned integer as a rational.
pub fn rat_u(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `n / d` as a rational. Panics on `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Lossy conversion for embedding numerics.
pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parse a decimal literal (`"6"`, `"2.5"`, `"-0.75"`) into an exact rational.
pub fn parse_decimal(s: &str) -> Option<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut num: BigInt = if int_part.is_empty() {
        BigInt::zero()
    } else {
        int_part.parse().ok()?
    };
    let mut den = BigInt::from(1);
    for c in frac_part.chars() {
        num = num * 10 + (c as u8 - b'0');
        den *= 10;
    }
    Some(Rat::new(num * sign, den))
}

/// Render a rational exactly as a decimal string, if its reduced denominator
/// is of the form `2^a 5^b` (always true for values produced by
/// [`parse_decimal`]). Falls back to `num/den` notation otherwise.
pub fn to_decimal_string(r: &Rat) -> String {
    let mut den = r.denom().clone();
    let mut pow2 = 0u32;
    let mut pow5 = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        pow2 += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        pow5 += 1;
    }
    if den != BigInt::from(1) {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = pow2.max(pow5);
    if places == 0 {
        return r.numer().to_string();
    }
    let scaled = (r * Rat::from_integer(BigInt::from(10).pow(places))).to_integer();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = if digits.len() <= places as usize {
        format!("{}{}", "0".repeat(places as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int, frac) = digits.split_at(digits.len() - places as usize);
    let frac = frac.trim_end_matches('0');
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(int);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    out
}

/// Render a rational with exactly `places` decimal places, rounding half
/// away from zero. Used for all report emission.
pub fn to_fixed(r: &Rat, places: u32) -> String {
    let scale = BigInt::from(10).pow(places);
    let scaled = r * Rat::from_integer(scale);
    // round half away from zero
    let half = ratio(1, 2);
    let rounded: BigInt = if scaled.is_negative() {
        -(-&scaled + &half).floor().to_integer()
    } else {
        (&scaled + &half).floor().to_integer()
    };
    let neg = rounded.is_negative();
    let digits = rounded.abs().to_string();
    let digits = if digits.len() <= places as usize {
        format!("{}{}", "0".repeat(places as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int, frac) = digits.split_at(digits.len() - places as usize);
    if places == 0 {
        return format!("{}{}", if neg { "-" } else { "" }, int);
    }
    format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
}

/// Render an `f64` with exactly `places` decimal places.
pub fn f64_fixed(x: f64, places: u32) -> String {
    format!("{:.*}", places as usize, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_decimal_forms() {
        assert_eq!(parse_decimal("6"), Some(rat(6)));
        assert_eq!(parse_decimal("2.5"), Some(ratio(5, 2)));
        assert_eq!(parse_decimal("-0.75"), Some(ratio(-3, 4)));
        assert_eq!(parse_decimal("0.125"), Some(ratio(1, 8)));
        assert_eq!(parse_decimal(""), None);
        assert_eq!(parse_decimal("1,5"), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn decimal_string_round_trip() {
        for s in ["6", "2.5", "0.125", "-3.04", "0"] {
            let r = parse_decimal(s).unwrap();
            assert_eq!(to_decimal_string(&r), s);
        }
        assert_eq!(to_decimal_string(&ratio(1, 3)), "1/3");
    }

    #[test]
    fn fixed_formatting() {
        assert_eq!(to_fixed(&ratio(12, 25), 6), "0.480000");
        assert_eq!(to_fixed(&ratio(-1, 10), 6), "-0.100000");
        assert_eq!(to_fixed(&ratio(1, 3), 6), "0.333333");
        assert_eq!(to_fixed(&ratio(2, 3), 6), "0.666667");
        assert_eq!(to_fixed(&rat(1340), 6), "1340.000000");
        // half away from zero
        assert_eq!(to_fixed(&ratio(5, 10_000_000), 6), "0.000001");
        assert_eq!(to_fixed(&ratio(-5, 10_000_000), 6), "-0.000001");
    }
}
