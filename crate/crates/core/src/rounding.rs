//! Scalar rounding kernels for the five IEEE 754-2008 rounding rules.
//!
//! Two entry points are provided. [`round_value`] rounds a finite `f64` and is
//! what the index-map builder uses. [`round_ratio`] rounds an exact rational
//! `num / den` with integer arithmetic only, which is what the 8-bit
//! quantization in [`crate::raster`] uses.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// One of the five rounding rules.
///
/// The declaration order (floor, ceil, round, fix, even) is the order used
/// when several rules are listed together, e.g. in a winner set `F & C & R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoundingRule {
    /// Round toward negative infinity.
    Floor,
    /// Round toward positive infinity.
    Ceil,
    /// Round to nearest, ties away from zero.
    HalfAwayFromZero,
    /// Round toward zero (truncate).
    TowardZero,
    /// Round to nearest, ties to even.
    HalfToEven,
}

/// The rule set evaluated by default: floor, ceil and round.
pub const DEFAULT_RULES: [RoundingRule; 3] = [
    RoundingRule::Floor,
    RoundingRule::Ceil,
    RoundingRule::HalfAwayFromZero,
];

impl RoundingRule {
    pub const ALL: [RoundingRule; 5] = [
        RoundingRule::Floor,
        RoundingRule::Ceil,
        RoundingRule::HalfAwayFromZero,
        RoundingRule::TowardZero,
        RoundingRule::HalfToEven,
    ];

    /// Configuration name: `floor`, `ceil`, `round`, `fix` or `even`.
    pub fn name(self) -> &'static str {
        match self {
            RoundingRule::Floor => "floor",
            RoundingRule::Ceil => "ceil",
            RoundingRule::HalfAwayFromZero => "round",
            RoundingRule::TowardZero => "fix",
            RoundingRule::HalfToEven => "even",
        }
    }

    /// Single-letter label used in winner tables.
    pub fn letter(self) -> char {
        match self {
            RoundingRule::Floor => 'F',
            RoundingRule::Ceil => 'C',
            RoundingRule::HalfAwayFromZero => 'R',
            RoundingRule::TowardZero => 'Z',
            RoundingRule::HalfToEven => 'E',
        }
    }

    pub fn from_letter(letter: char) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.letter() == letter.to_ascii_uppercase())
    }
}

impl fmt::Display for RoundingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rounding rule {0:?} (expected floor, ceil, round, fix or even)")]
pub struct ParseRuleError(pub String);

impl FromStr for RoundingRule {
    type Err = ParseRuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|r| r.name() == lowered)
            .ok_or_else(|| ParseRuleError(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RoundingError {
    #[error("cannot round non-finite value {0}")]
    NonFinite(f64),
    #[error("rounded value of {0} does not fit in a 64-bit integer")]
    OutOfRange(f64),
}

/// Rounds a finite real to an integer under `rule`.
///
/// Ties are detected by exact floating-point comparison; no epsilon is used.
pub fn round_value(x: f64, rule: RoundingRule) -> Result<i64, RoundingError> {
    if !x.is_finite() {
        return Err(RoundingError::NonFinite(x));
    }
    let rounded = match rule {
        RoundingRule::Floor => x.floor(),
        RoundingRule::Ceil => x.ceil(),
        RoundingRule::HalfAwayFromZero => x.round(),
        RoundingRule::TowardZero => x.trunc(),
        RoundingRule::HalfToEven => x.round_ties_even(),
    };
    // i64::MAX is not representable; 2^63 is the first value that overflows.
    if !(-9_223_372_036_854_775_808.0..9_223_372_036_854_775_808.0).contains(&rounded) {
        return Err(RoundingError::OutOfRange(x));
    }
    Ok(rounded as i64)
}

/// Rounds the exact rational `num / den` under `rule`.
///
/// # Panics
///
/// Panics if `den` is zero.
pub fn round_ratio(num: i64, den: i64, rule: RoundingRule) -> i64 {
    assert!(den != 0, "round_ratio: zero denominator");
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    let floor = num.div_euclid(den);
    let rem = num.rem_euclid(den);
    if rem == 0 {
        return floor;
    }
    let ceil = floor + 1;
    // Compare the fractional part rem/den with 1/2 as 2*rem vs den.
    let twice = 2 * rem as i128;
    let den = den as i128;
    match rule {
        RoundingRule::Floor => floor,
        RoundingRule::Ceil => ceil,
        RoundingRule::TowardZero => {
            if num < 0 {
                ceil
            } else {
                floor
            }
        }
        RoundingRule::HalfAwayFromZero => match twice.cmp(&den) {
            std::cmp::Ordering::Less => floor,
            std::cmp::Ordering::Greater => ceil,
            std::cmp::Ordering::Equal => {
                if num < 0 {
                    floor
                } else {
                    ceil
                }
            }
        },
        RoundingRule::HalfToEven => match twice.cmp(&den) {
            std::cmp::Ordering::Less => floor,
            std::cmp::Ordering::Greater => ceil,
            std::cmp::Ordering::Equal => {
                if floor.rem_euclid(2) == 0 {
                    floor
                } else {
                    ceil
                }
            }
        },
    }
}
