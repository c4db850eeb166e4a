//! Exact rational helpers for QI constants.
//!
//! Constants that are roots of quadratics are stored as the smallest multiple
//! of `1/ROOT_DENOMINATOR` not below the true root, so every reported value is
//! an exact rational and runs are reproducible.

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serializer;

pub type Rational = BigRational;

/// Denominator used for ceiling approximations of square-root constants.
pub const ROOT_DENOMINATOR: u64 = 1_000_000;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Smallest `C > 0`, rounded up to the `1/ROOT_DENOMINATOR` grid, with
/// `C² + image·C ≥ domain`. This is the constant forced on a pair at domain
/// distance `domain` and image distance `image` by the lower QI inequality
/// `domain/C − C ≤ image`.
pub fn lower_root(domain: u32, image: u32) -> Rational {
    let scale = u128::from(ROOT_DENOMINATOR);
    let a = u128::from(domain);
    let b = u128::from(image);
    // root = (−b + √(b² + 4a)) / 2; want the least k with k/scale ≥ root,
    // i.e. 2k + b·scale ≥ √((b² + 4a)·scale²).
    let radicand = (b * b + 4 * a) * scale * scale;
    let mut s = radicand.sqrt();
    if s * s < radicand {
        s += 1;
    }
    let shifted = s.saturating_sub(b * scale);
    let k = shifted.div_ceil(2);
    Rational::new(BigInt::from(k), BigInt::from(scale))
}

/// `⌊r⌋` clamped to `[0, u64::MAX]`.
pub fn floor_u64(r: &Rational) -> u64 {
    let f = r.floor().to_integer();
    if f.is_negative() {
        0
    } else {
        f.to_u64().unwrap_or(u64::MAX)
    }
}

/// `⌈r⌉` clamped to `[0, u64::MAX]`.
pub fn ceil_u64(r: &Rational) -> u64 {
    let c = r.ceil().to_integer();
    if c.is_negative() {
        0
    } else {
        c.to_u64().unwrap_or(u64::MAX)
    }
}

/// Parses `7`, `5/2` or a finite decimal such as `2.449490`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if !whole_digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("{whole_digits}{frac}").parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(digits, den);
        return Some(if negative { -r } else { r });
    }
    s.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// Canonical text form: `n` for integers, `n/d` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Six-digit decimal rendering, for human-facing reports only.
pub fn format_decimal(r: &Rational) -> String {
    let scaled = (r * int(ROOT_DENOMINATOR as i64)).round().to_integer();
    let scale = BigInt::from(ROOT_DENOMINATOR);
    let sign = if scaled.is_negative() { "-" } else { "" };
    let abs = scaled.abs();
    format!("{sign}{}.{:06}", &abs / &scale, (&abs % &scale).to_u64().unwrap_or(0))
}

pub(crate) fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

pub(crate) fn serialize_opt<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&format_rational(r)),
        None => s.serialize_none(),
    }
}
