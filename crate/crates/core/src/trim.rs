//! Trim levels as exact rationals.
//!
//! The trim counts `N_gamma = floor(gamma * N)` and `Nbar_gamma =
//! ceil(gamma * N)` must be computed on the exact value of `gamma`:
//! `(0.3f64 * 10.0).floor()` is 3, while the float 0.3 times 10 is below 3,
//! so naive float arithmetic silently shifts every order-statistic index and
//! breaks the count identities. A [`TrimLevel`] therefore carries an exact
//! `num/den` representation, built from a decimal string, an explicit ratio,
//! or the exact binary value of an `f64`.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const MAX_POW2_DEN: u32 = 100; // f64 path: den = 2^k, k <= 100
const MAX_DECIMAL_DIGITS: usize = 25;

/// An exact rational trim level in (0, 1).
#[derive(Debug, Clone)]
pub struct TrimLevel {
    num: u128,
    den: u128,
    text: String,
}

impl TrimLevel {
    /// Exact conversion of the binary value of `gamma`.
    pub fn from_f64(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidParam(format!("trim level {gamma} outside (0, 1)")));
        }
        let bits = gamma.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mut num, mut shift) = if raw_exp == 0 {
            (frac as u128, 1074u32)
        } else {
            ((frac | (1 << 52)) as u128, (1075 - raw_exp) as u32)
        };
        let reduce = num.trailing_zeros().min(shift);
        num >>= reduce;
        shift -= reduce;
        if shift > MAX_POW2_DEN {
            return Err(Error::InvalidParam(format!(
                "trim level {gamma} too small for exact arithmetic; pass it as a decimal string"
            )));
        }
        Ok(Self { num, den: 1u128 << shift, text: format!("{gamma}") })
    }

    /// Parses a plain decimal such as `0.25`, `.3`, or `0.640`.
    pub fn from_decimal(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("`{s}` is not a decimal trim level in (0, 1)"));
        let trimmed = s.trim();
        let (int_part, frac_part) = trimmed.split_once('.').ok_or_else(bad)?;
        if !(int_part.is_empty() || int_part == "0")
            || frac_part.is_empty()
            || frac_part.len() > MAX_DECIMAL_DIGITS
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let num: u128 = frac_part.parse().map_err(|_| bad())?;
        let den = 10u128.pow(frac_part.len() as u32);
        if num == 0 {
            return Err(bad());
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g, text: trimmed.to_string() })
    }

    /// Exact ratio `num/den`, e.g. grid levels `i/20`.
    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::InvalidParam(format!("ratio {num}/{den} outside (0, 1)")));
        }
        let (num, den) = (num as u128, den as u128);
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g, text: format!("{num}/{den}") })
    }

    /// Nearest float, for reporting and population-level computations.
    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// The source text this level was built from.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// `floor(gamma * n)`, exact.
    pub fn floor_mul(&self, n: usize) -> usize {
        (self.num * n as u128 / self.den) as usize
    }

    /// `ceil(gamma * n) = -floor(-gamma * n)`, exact.
    pub fn ceil_mul(&self, n: usize) -> usize {
        ((self.num * n as u128 + self.den - 1) / self.den) as usize
    }

    fn cmp_exact(&self, other: &Self) -> std::cmp::Ordering {
        // cross products can reach ~2^208, so compare in 256-bit space
        let left = widening_mul(self.num, other.den);
        let right = widening_mul(other.num, self.den);
        left.cmp(&right)
    }
}

impl PartialEq for TrimLevel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_exact(other) == std::cmp::Ordering::Equal
    }
}

impl fmt::Display for TrimLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for TrimLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for TrimLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if let Some((p, q)) = s.split_once('/') {
            let num = p.trim().parse().map_err(D::Error::custom)?;
            let den = q.trim().parse().map_err(D::Error::custom)?;
            return TrimLevel::from_ratio(num, den).map_err(D::Error::custom);
        }
        TrimLevel::from_decimal(&s).map_err(D::Error::custom)
    }
}

/// A validated pair of trim levels with `0 < alpha < beta < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrimSpec")]
pub struct TrimSpec {
    alpha: TrimLevel,
    beta: TrimLevel,
}

#[derive(Deserialize)]
struct RawTrimSpec {
    alpha: TrimLevel,
    beta: TrimLevel,
}

impl TryFrom<RawTrimSpec> for TrimSpec {
    type Error = Error;

    fn try_from(raw: RawTrimSpec) -> Result<Self> {
        TrimSpec::from_levels(raw.alpha, raw.beta)
    }
}

impl TrimSpec {
    pub fn from_levels(alpha: TrimLevel, beta: TrimLevel) -> Result<Self> {
        if alpha.cmp_exact(&beta) != std::cmp::Ordering::Less {
            return Err(Error::InvalidTrim {
                alpha: alpha.text.clone(),
                beta: beta.text.clone(),
            });
        }
        Ok(Self { alpha, beta })
    }

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::from_levels(TrimLevel::from_f64(alpha)?, TrimLevel::from_f64(beta)?)
    }

    pub fn from_decimal(alpha: &str, beta: &str) -> Result<Self> {
        Self::from_levels(TrimLevel::from_decimal(alpha)?, TrimLevel::from_decimal(beta)?)
    }

    pub fn alpha(&self) -> &TrimLevel {
        &self.alpha
    }

    pub fn beta(&self) -> &TrimLevel {
        &self.beta
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.as_f64()
    }

    pub fn beta_f64(&self) -> f64 {
        self.beta.as_f64()
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Full 256-bit product of two u128s as (hi, lo).
fn widening_mul(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = (1 << 64) - 1;
    let (a1, a0) = (a >> 64, a & MASK);
    let (b1, b0) = (b >> 64, b & MASK);
    let ll = a0 * b0;
    let lh = a0 * b1;
    let hl = a1 * b0;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (mid << 64) | (ll & MASK);
    let hi = a1 * b1 + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}
