//! Half-integer grades used for tree orders and convergence orders.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A multiple of 1/2, stored as the number of halves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfInt(pub i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub fn from_halves(halves: i64) -> Self {
        HalfInt(halves)
    }

    pub fn from_int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    pub fn halves(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Nearest half-integer at or below `x`.
    pub fn floor_f64(x: f64) -> Self {
        HalfInt((2.0 * x + 1e-9).floor() as i64)
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl std::iter::Sum for HalfInt {
    fn sum<I: Iterator<Item = HalfInt>>(iter: I) -> HalfInt {
        HalfInt(iter.map(|h| h.0).sum())
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", if self.0 < 0 && self.0 > -2 { "-0".to_string() } else { (self.0 / 2).to_string() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseHalfIntError(pub String);

impl fmt::Display for ParseHalfIntError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not a half-integer: {:?}", self.0)
    }
}

impl std::error::Error for ParseHalfIntError {}

impl FromStr for HalfInt {
    type Err = ParseHalfIntError;

    /// Accepts decimal (`1.5`, `2`, `0.5`) or fraction (`3/2`) notation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseHalfIntError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err())?;
            let d: i64 = d.trim().parse().map_err(|_| err())?;
            return match d {
                1 => Ok(HalfInt(2 * n)),
                2 => Ok(HalfInt(n)),
                _ => Err(err()),
            };
        }
        let x: f64 = t.parse().map_err(|_| err())?;
        let halves = 2.0 * x;
        if !halves.is_finite() || (halves - halves.round()).abs() > 1e-12 {
            return Err(err());
        }
        Ok(HalfInt(halves.round() as i64))
    }
}

/// A leading order that may be infinite (the quantity vanishes identically).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Finite(HalfInt),
    Infinite,
}

impl Order {
    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinite)
    }

    pub fn finite(self) -> Option<HalfInt> {
        match self {
            Order::Finite(h) => Some(h),
            Order::Infinite => None,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(h) => write!(f, "{h}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Order::Finite(h) => s.serialize_f64(h.as_f64()),
            Order::Infinite => s.serialize_str("inf"),
        }
    }
}
