//! Fixed-point fee amounts.
//!
//! Every payment inside the mechanisms is an integer count of base units so
//! that ordering, ties and payments are exact. Continuous values coming out
//! of [`crate::distributions`] cross into base units through a [`ValueScale`].

use std::fmt;
use std::iter::Sum;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Non-negative amount in the smallest currency sub-unit.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FeeAmount(u64);

impl FeeAmount {
    pub const ZERO: FeeAmount = FeeAmount(0);

    pub const fn new(units: u64) -> Self {
        FeeAmount(units)
    }

    pub const fn units(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, rhs: FeeAmount) -> Result<FeeAmount> {
        self.0
            .checked_add(rhs.0)
            .map(FeeAmount)
            .ok_or(Error::Overflow)
    }

    pub fn checked_sub(self, rhs: FeeAmount) -> Result<FeeAmount> {
        self.0
            .checked_sub(rhs.0)
            .map(FeeAmount)
            .ok_or(Error::Overflow)
    }

    pub fn checked_mul(self, factor: u64) -> Result<FeeAmount> {
        self.0
            .checked_mul(factor)
            .map(FeeAmount)
            .ok_or(Error::Overflow)
    }

    /// Sums amounts, failing on overflow instead of wrapping.
    pub fn checked_sum<I>(iter: I) -> Result<FeeAmount>
    where
        I: IntoIterator<Item = FeeAmount>,
    {
        iter.into_iter()
            .try_fold(FeeAmount::ZERO, |acc, x| acc.checked_add(x))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl fmt::Display for FeeAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for FeeAmount {
    fn from(units: u64) -> Self {
        FeeAmount(units)
    }
}

impl<'a> Sum<&'a FeeAmount> for Option<FeeAmount> {
    fn sum<I: Iterator<Item = &'a FeeAmount>>(iter: I) -> Self {
        FeeAmount::checked_sum(iter.copied()).ok()
    }
}

/// Number of base units per unit of continuous value.
///
/// Values are rounded to the nearest base unit. Large scales keep quantization
/// ties negligible; the default (10^4) corresponds to hundredths of a cent
/// when values are in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueScale(f64);

impl Default for ValueScale {
    fn default() -> Self {
        ValueScale(10_000.0)
    }
}

impl ValueScale {
    pub fn new(units_per_value: f64) -> Result<Self> {
        if !(units_per_value.is_finite() && units_per_value > 0.0) {
            return Err(Error::param(format!(
                "value scale must be positive and finite, got {units_per_value}"
            )));
        }
        Ok(ValueScale(units_per_value))
    }

    pub fn units_per_value(self) -> f64 {
        self.0
    }

    pub fn to_fee(self, value: f64) -> Result<FeeAmount> {
        let scaled = (value * self.0).round();
        if !(scaled.is_finite() && scaled >= 0.0) {
            return Err(Error::param(format!("value {value} cannot be quantized")));
        }
        if scaled >= u64::MAX as f64 {
            return Err(Error::Overflow);
        }
        Ok(FeeAmount(scaled as u64))
    }

    pub fn to_value(self, fee: FeeAmount) -> f64 {
        fee.0 as f64 / self.0
    }
}
