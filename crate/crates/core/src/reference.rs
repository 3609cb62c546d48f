//! Memory-based reference prices.
//!
//! The reference price of a brand follows the exponential-smoothing recursion
//! `r[t] = pi * r[t-1] + (1 - pi) * p[t-1]` with `r[1] = p[1]`. The same value
//! has a direct expansion over the price history,
//! `r[t] = pi^(t-1) * p[1] + (1 - pi) * sum_{i=1}^{t-1} pi^(i-1) * p[t-i]`,
//! which lets the carry-over weight enter a likelihood as an ordinary
//! parameter. Periods are 1-based throughout this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed prices of one brand, one entry per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries(Vec<f64>);

impl PriceSeries {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::invalid("price series is empty"));
        }
        if let Some((i, p)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::invalid(format!(
                "price at period {} is not strictly positive: {p}",
                i + 1
            )));
        }
        Ok(Self(prices))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weight on the previous reference price, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CarryoverWeight(f64);

impl CarryoverWeight {
    pub fn new(pi: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&pi) {
            Ok(Self(pi))
        } else {
            Err(Error::invalid(format!("carry-over weight {pi} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CarryoverWeight {
    type Error = Error;

    fn try_from(pi: f64) -> Result<Self> {
        Self::new(pi)
    }
}

impl From<CarryoverWeight> for f64 {
    fn from(w: CarryoverWeight) -> f64 {
        w.0
    }
}

/// Reference prices aligned with a [`PriceSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries(Vec<f64>);

impl ReferenceSeries {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Reference price at 1-based `period`.
    pub fn at(&self, period: usize) -> Option<f64> {
        period.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }
}

/// Full reference series by the O(T) recursion.
pub fn reference_iterative(prices: &PriceSeries, pi: CarryoverWeight) -> ReferenceSeries {
    let p = prices.as_slice();
    let w = pi.value();
    let mut out = Vec::with_capacity(p.len());
    let mut r = p[0];
    out.push(r);
    for t in 1..p.len() {
        r = w * r + (1.0 - w) * p[t - 1];
        out.push(r);
    }
    ReferenceSeries(out)
}

/// Reference price at 1-based `period` by direct summation of the expansion.
///
/// Kept independent of [`reference_iterative`] so each can check the other.
/// Powers of `pi` are accumulated by repeated multiplication.
pub fn reference_closed_form(
    prices: &PriceSeries,
    pi: CarryoverWeight,
    period: usize,
) -> Result<f64> {
    let p = prices.as_slice();
    if period == 0 || period > p.len() {
        return Err(Error::invalid(format!(
            "period {period} outside 1..={}",
            p.len()
        )));
    }
    let w = pi.value();
    // i runs 1..t-1; `pow` holds pi^(i-1)
    let mut pow = 1.0;
    let mut sum = 0.0;
    for i in 1..period {
        sum += pow * p[period - i - 1];
        pow *= w;
    }
    // after the loop pow = pi^(t-1)
    Ok(pow * p[0] + (1.0 - w) * sum)
}

/// Which utility coefficient applies to a price deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Gain,
    Loss,
}

/// Signed deviation `r - p` together with its branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub branch: Branch,
    pub value: f64,
}

/// Classify `r - p`: a gain when the reference exceeds the price, otherwise a loss.
pub fn gain_loss(reference: f64, price: f64) -> Deviation {
    let value = reference - price;
    let branch = if reference > price {
        Branch::Gain
    } else {
        Branch::Loss
    };
    Deviation { branch, value }
}

/// Unit step with `H(0) = 0`.
pub fn heaviside(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else {
        0
    }
}
