//! Exact rational helpers.

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};

/// Exact rational number used throughout the oracles and certificates.
pub type Exact = BigRational;

pub fn int(n: i64) -> Exact {
    Exact::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Exact {
    Exact::new(BigInt::from(num), BigInt::from(den))
}

/// `2^-k` as an exact rational.
pub fn pow2_neg(k: u32) -> Exact {
    Exact::new(BigInt::one(), BigInt::one() << k as usize)
}

/// `num / 2^k`.
pub fn dyadic(num: u64, k: u32) -> Exact {
    Exact::new(BigInt::from(num), BigInt::one() << k as usize)
}

pub fn to_f64(r: &Exact) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // to_f64 only fails on huge numerators/denominators; fall back to
        // scaling both into range.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Rounds half away from zero to `digits` decimal places and renders with
/// exactly that many fractional digits.
pub fn to_decimal_string(r: &Exact, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = r * Exact::from_integer(scale.clone());
    let half = ratio(1, 2);
    let rounded = if scaled.is_negative() {
        -((-scaled) + half).floor()
    } else {
        (scaled + half).floor()
    };
    let n = rounded.to_integer();
    let neg = n.is_negative();
    let abs = n.abs();
    let int_part = &abs / &scale;
    let frac_part = &abs % &scale;
    let mut s = String::new();
    if neg && !abs.is_zero() {
        s.push('-');
    }
    s.push_str(&int_part.to_string());
    if digits > 0 {
        s.push('.');
        s.push_str(&format!(
            "{:0>width$}",
            frac_part.to_string(),
            width = digits as usize
        ));
    }
    s
}

/// Parses `"p/q"` or an integer.
pub fn parse_exact(s: &str) -> Option<Exact> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(Exact::new(p, q))
        }
        None => Some(Exact::from_integer(s.parse().ok()?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_rounding() {
        assert_eq!(to_decimal_string(&ratio(679, 1024), 8), "0.66308594");
        assert_eq!(to_decimal_string(&ratio(15, 16), 8), "0.93750000");
        assert_eq!(to_decimal_string(&int(1), 8), "1.00000000");
        assert_eq!(to_decimal_string(&ratio(-1, 3), 3), "-0.333");
        assert_eq!(to_decimal_string(&ratio(5, 2), 0), "3");
    }

    #[test]
    fn parse_roundtrip() {
        assert_eq!(parse_exact("15/64"), Some(ratio(15, 64)));
        assert_eq!(parse_exact("14"), Some(int(14)));
        assert_eq!(parse_exact("1/0"), None);
        assert_eq!(
            parse_exact(&ratio(122, 243).to_string()),
            Some(ratio(122, 243))
        );
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(pow2_neg(0), int(1));
        assert_eq!(pow2_neg(3), ratio(1, 8));
        assert_eq!(dyadic(15, 6), ratio(15, 64));
    }
}
