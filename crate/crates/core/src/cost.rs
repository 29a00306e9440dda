//! Exact storage-cost arithmetic.
//!
//! Costs, capacities and imbalance bounds are exact rationals so that equality
//! comparisons (candidate tie-breaks, capacity boundaries such as
//! `n + 1/2 + K/(2n)`) never depend on floating point rounding.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Serialize, Serializer};

/// A non-negative exact storage cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostParseError {
    #[error("invalid number `{0}`")]
    Invalid(String),
    #[error("negative value `{0}`")]
    Negative(String),
}

impl Cost {
    pub const ZERO: Cost = Cost(Ratio::new_raw(0, 1));
    pub const ONE: Cost = Cost(Ratio::new_raw(1, 1));

    pub fn from_int(n: i64) -> Self {
        Cost(Ratio::from_integer(n as i128))
    }

    /// `num / den`, reduced.
    pub fn ratio(num: i64, den: i64) -> Self {
        Cost(Ratio::new(num as i128, den as i128))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Absolute difference.
    pub fn abs_diff(self, other: Cost) -> Cost {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    pub fn div_int(self, n: usize) -> Cost {
        Cost(self.0 / Ratio::from_integer(n as i128))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost(self.0 - rhs.0)
    }
}

impl SubAssign for Cost {
    fn sub_assign(&mut self, rhs: Cost) {
        self.0 -= rhs.0;
    }
}

impl Mul for Cost {
    type Output = Cost;
    fn mul(self, rhs: Cost) -> Cost {
        Cost(self.0 * rhs.0)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Cost> for Cost {
    fn sum<I: Iterator<Item = &'a Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |a, b| a + *b)
    }
}

/// Prints an exact decimal when the denominator has only factors 2 and 5,
/// otherwise `num/den`. Either form parses back to the same value.
impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = *self.0.numer();
        let den = *self.0.denom();
        if den == 1 {
            return write!(f, "{num}");
        }
        let mut d = den;
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return write!(f, "{num}/{den}");
        }
        let digits = twos.max(fives);
        let scale = 10i128.pow(digits);
        let scaled = num * (scale / den);
        let sign = if scaled < 0 { "-" } else { "" };
        let scaled = scaled.abs();
        let int = scaled / scale;
        let frac = scaled % scale;
        write!(f, "{sign}{int}.{frac:0width$}", width = digits as usize)
    }
}

impl FromStr for Cost {
    type Err = CostParseError;

    /// Accepts integers, decimals (`2.5`) and fractions (`1/6`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CostParseError::Invalid(s.to_string());
        let value = if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ratio::new(n, d)
        } else if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int.starts_with('-');
            let int_part: i128 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let scale = 10i128.pow(frac.len() as u32);
            let frac_part: i128 = frac.parse().map_err(|_| bad())?;
            let mag = int_part.abs() * scale + frac_part;
            Ratio::new(if negative { -mag } else { mag }, scale)
        } else {
            Ratio::from_integer(s.parse::<i128>().map_err(|_| bad())?)
        };
        if value.is_negative() {
            return Err(CostParseError::Negative(s.to_string()));
        }
        Ok(Cost(value))
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

/// A per-server storage limit; `None` in the wrapper means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Capacity(pub Option<Cost>);

impl Capacity {
    pub const UNBOUNDED: Capacity = Capacity(None);

    pub fn admits(&self, load: Cost) -> bool {
        match self.0 {
            Some(max) => load <= max,
            None => true,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(c) => write!(f, "{c}"),
            None => f.write_str("inf"),
        }
    }
}

impl FromStr for Capacity {
    type Err = CostParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            Ok(Capacity(None))
        } else {
            Ok(Capacity(Some(s.parse()?)))
        }
    }
}

/// Load-imbalance constraint ε on pairwise server storage differences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Imbalance {
    /// `|f(s) - f(s')| <= value`.
    Absolute(Cost),
    /// `|f(s) - f(s')| <= fraction * mean load`.
    Relative(Cost),
    Unbounded,
}

impl Default for Imbalance {
    fn default() -> Self {
        Imbalance::Relative(Cost::ratio(2, 100))
    }
}

impl Imbalance {
    /// Largest admissible pairwise difference for the given loads.
    pub fn bound(&self, loads: &[Cost]) -> Option<Cost> {
        match *self {
            Imbalance::Absolute(c) => Some(c),
            Imbalance::Relative(frac) => {
                if loads.is_empty() {
                    return Some(Cost::ZERO);
                }
                let mean = loads.iter().sum::<Cost>().div_int(loads.len());
                Some(frac * mean)
            }
            Imbalance::Unbounded => None,
        }
    }

    pub fn admits(&self, loads: &[Cost]) -> bool {
        match self.bound(loads) {
            None => true,
            Some(b) => max_pairwise_difference(loads) <= b,
        }
    }

    /// Parses `abs:<v>`, `rel:<v>` or `inf`.
    pub fn parse_flag(s: &str) -> Result<Self, CostParseError> {
        if s == "inf" {
            return Ok(Imbalance::Unbounded);
        }
        match s.split_once(':') {
            Some((mode, v)) => Imbalance::from_parts(mode, v),
            None => Err(CostParseError::Invalid(s.to_string())),
        }
    }

    /// `mode` is `abs` or `rel`; `value` may be `inf`.
    pub fn from_parts(mode: &str, value: &str) -> Result<Self, CostParseError> {
        if value == "inf" {
            return match mode {
                "abs" | "rel" => Ok(Imbalance::Unbounded),
                _ => Err(CostParseError::Invalid(mode.to_string())),
            };
        }
        let v: Cost = value.parse()?;
        match mode {
            "abs" => Ok(Imbalance::Absolute(v)),
            "rel" => Ok(Imbalance::Relative(v)),
            _ => Err(CostParseError::Invalid(mode.to_string())),
        }
    }
}

impl fmt::Display for Imbalance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Imbalance::Absolute(c) => write!(f, "abs {c}"),
            Imbalance::Relative(c) => write!(f, "rel {c}"),
            Imbalance::Unbounded => f.write_str("abs inf"),
        }
    }
}

pub fn max_pairwise_difference(loads: &[Cost]) -> Cost {
    match (loads.iter().max(), loads.iter().min()) {
        (Some(&hi), Some(&lo)) => hi - lo,
        _ => Cost::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!("3".parse::<Cost>().unwrap(), Cost::from_int(3));
        assert_eq!("2.5".parse::<Cost>().unwrap(), Cost::ratio(5, 2));
        assert_eq!(
            "0.000001".parse::<Cost>().unwrap(),
            Cost::ratio(1, 1_000_000)
        );
        assert_eq!("1/6".parse::<Cost>().unwrap(), Cost::ratio(1, 6));
        assert!(matches!(
            "-1".parse::<Cost>(),
            Err(CostParseError::Negative(_))
        ));
        assert!("1/0".parse::<Cost>().is_err());
        assert!("abc".parse::<Cost>().is_err());
        assert!("1.".parse::<Cost>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for c in [
            Cost::ratio(5, 2),
            Cost::ratio(1, 6),
            Cost::ratio(3, 40),
            Cost::from_int(7),
            Cost::ZERO,
            Cost::ratio(1, 3) + Cost::ratio(1, 7),
        ] {
            let s = c.to_string();
            assert_eq!(s.parse::<Cost>().unwrap(), c, "{s}");
        }
        assert_eq!(Cost::ratio(3, 2).to_string(), "1.5");
        assert_eq!(Cost::ratio(3, 40).to_string(), "0.075");
    }

    #[test]
    fn relative_imbalance_uses_mean() {
        let loads = [Cost::from_int(100), Cost::from_int(102)];
        assert!(Imbalance::Relative(Cost::ratio(2, 100)).admits(&loads));
        let loads = [Cost::from_int(100), Cost::from_int(103)];
        assert!(!Imbalance::Relative(Cost::ratio(2, 100)).admits(&loads));
        assert!(Imbalance::Unbounded.admits(&loads));
    }

    #[test]
    fn capacity_is_inclusive() {
        let cap = Capacity(Some(Cost::ratio(3, 2)));
        assert!(cap.admits(Cost::ratio(3, 2)));
        assert!(!cap.admits(Cost::ratio(3, 2) + Cost::ratio(1, 1000)));
    }
}
