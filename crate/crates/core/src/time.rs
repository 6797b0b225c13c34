//! Simulation time in exact rational minutes.
//!
//! All input timestamps are whole minutes since the scenario epoch, but crane
//! cycles such as `1 / 0.35` minutes are not, so instants and durations are
//! carried as arbitrary-precision rationals and only rounded when reported.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational quantity used for durations, rates and fractions.
pub type Rational = BigRational;

/// Builds an integer-valued rational.
pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Builds `numer / denom`.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Rounds half-up to the nearest integer (`2.5 -> 3`, `-2.5 -> -2`).
pub fn round_half_up(value: &Rational) -> i64 {
    let half = ratio(1, 2);
    (value + half)
        .floor()
        .to_integer()
        .to_i64()
        .expect("rounded value fits in i64")
}

/// Parses a plain decimal literal (`"0.05"`, `"12"`, `"-1.5"`, `"3/7"`) exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    if body.is_empty() {
        return None;
    }
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{}{}", if whole.is_empty() { "0" } else { whole }, frac);
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let value = Rational::new(numer, denom);
    Some(if negative { -value } else { value })
}

/// Converts a float to the rational its shortest decimal representation denotes,
/// so `0.05_f64` becomes exactly `1/20`.
pub fn from_f64_decimal(value: f64) -> Option<Rational> {
    if !value.is_finite() {
        return None;
    }
    parse_decimal(&format!("{value}"))
}

/// Renders a rational as a decimal with up to four fractional digits, or as an
/// integer when it is whole.
pub fn format_decimal(value: &Rational) -> String {
    if value.is_integer() {
        return value.to_integer().to_string();
    }
    let scaled = value * int(10_000);
    let rounded = round_half_up(&scaled);
    let sign = if rounded < 0 { "-" } else { "" };
    let abs = rounded.unsigned_abs();
    let text = format!("{sign}{}.{:04}", abs / 10_000, abs % 10_000);
    text.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Lossy conversion for display and plotting only.
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// An instant on the simulation clock, in minutes since the scenario epoch.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(Rational);

impl SimTime {
    pub fn zero() -> Self {
        SimTime(Rational::zero())
    }

    pub fn from_minutes(minutes: i64) -> Self {
        SimTime(int(minutes))
    }

    pub fn from_rational(minutes: Rational) -> Self {
        SimTime(minutes)
    }

    /// Latest representable instant used as an open horizon.
    pub fn far_future() -> Self {
        SimTime(int(i64::MAX / 4))
    }

    pub fn minutes(&self) -> &Rational {
        &self.0
    }

    /// Whole minutes, rounded half-up.
    pub fn rounded_minutes(&self) -> i64 {
        round_half_up(&self.0)
    }

    /// `Some(n)` when the instant falls on a whole minute.
    pub fn whole_minutes(&self) -> Option<i64> {
        if self.0.is_integer() {
            self.0.to_integer().to_i64()
        } else {
            None
        }
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Elapsed minutes from `earlier` to `self`.
    pub fn since(&self, earlier: &SimTime) -> Rational {
        &self.0 - &earlier.0
    }

    pub fn plus(&self, minutes: &Rational) -> SimTime {
        SimTime(&self.0 + minutes)
    }
}

impl Add<&Rational> for &SimTime {
    type Output = SimTime;

    fn add(self, rhs: &Rational) -> SimTime {
        self.plus(rhs)
    }
}

impl Sub for &SimTime {
    type Output = Rational;

    fn sub(self, rhs: &SimTime) -> Rational {
        self.since(rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_decimal(&self.0))
    }
}

impl FromStr for SimTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_decimal(s)
            .map(SimTime)
            .ok_or_else(|| format!("not a minute value: {s:?}"))
    }
}

/// `base^exp` for a non-negative integer exponent.
pub fn pow(base: &Rational, exp: u32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(&ratio(5, 2)), 3);
        assert_eq!(round_half_up(&ratio(-5, 2)), -2);
        assert_eq!(round_half_up(&ratio(11043, 10)), 1104);
        assert_eq!(round_half_up(&int(7)), 7);
    }

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_decimal("0.05"), Some(ratio(1, 20)));
        assert_eq!(parse_decimal("12"), Some(int(12)));
        assert_eq!(parse_decimal("-1.5"), Some(ratio(-3, 2)));
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_decimal("3/7"), Some(ratio(3, 7)));
        assert_eq!(parse_decimal("1/0"), None);
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal(""), None);
        assert_eq!(from_f64_decimal(0.35), Some(ratio(7, 20)));
    }

    #[test]
    fn formatting() {
        assert_eq!(format_decimal(&int(1365)), "1365");
        assert_eq!(format_decimal(&ratio(1, 3)), "0.3333");
        assert_eq!(format_decimal(&ratio(5, 2)), "2.5");
        assert_eq!(format_decimal(&ratio(-5, 2)), "-2.5");
    }
}
