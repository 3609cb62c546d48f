//! Household scanner panels.

use crate::error::{Error, Result};
use crate::reference::PriceSeries;

/// One household's price history and purchase outcomes.
///
/// Prices are stored period-major: `prices[t * n_brands + j]` is the price of
/// brand `j` (0-based) in period `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub id: u64,
    n_brands: usize,
    prices: Vec<f64>,
    choices: Vec<Option<usize>>,
}

impl Household {
    pub fn new(
        id: u64,
        n_brands: usize,
        prices: Vec<f64>,
        choices: Vec<Option<usize>>,
    ) -> Result<Self> {
        if n_brands < 2 {
            return Err(Error::invalid(format!("household {id}: need at least 2 brands")));
        }
        if choices.is_empty() {
            return Err(Error::invalid(format!("household {id}: no periods")));
        }
        if prices.len() != choices.len() * n_brands {
            return Err(Error::invalid(format!(
                "household {id}: {} prices for {} periods x {n_brands} brands",
                prices.len(),
                choices.len()
            )));
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid(format!(
                "household {id}: non-positive price at period {} brand {}",
                i / n_brands + 1,
                i % n_brands + 1
            )));
        }
        if let Some(t) = choices
            .iter()
            .position(|c| matches!(c, Some(j) if *j >= n_brands))
        {
            return Err(Error::invalid(format!(
                "household {id}: choice out of range at period {}",
                t + 1
            )));
        }
        Ok(Self {
            id,
            n_brands,
            prices,
            choices,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.choices.len()
    }

    pub fn n_brands(&self) -> usize {
        self.n_brands
    }

    /// All brand prices in 0-based period `t`.
    pub fn prices_at(&self, t: usize) -> &[f64] {
        &self.prices[t * self.n_brands..(t + 1) * self.n_brands]
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Chosen brand (0-based) in 0-based period `t`, `None` for no purchase.
    pub fn choice(&self, t: usize) -> Option<usize> {
        self.choices[t]
    }

    pub fn choices(&self) -> &[Option<usize>] {
        &self.choices
    }

    /// Price history of one brand.
    pub fn brand_series(&self, brand: usize) -> PriceSeries {
        let p = self
            .prices
            .chunks_exact(self.n_brands)
            .map(|row| row[brand])
            .collect();
        PriceSeries::new(p).expect("household prices are validated on construction")
    }

    pub fn brand_series_all(&self) -> Vec<PriceSeries> {
        (0..self.n_brands).map(|j| self.brand_series(j)).collect()
    }

    /// Purchase indicator `x[t]`.
    pub fn purchased(&self, t: usize) -> bool {
        self.choices[t].is_some()
    }
}

/// Households with a common brand count.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoicePanel {
    n_brands: usize,
    households: Vec<Household>,
}

impl ChoicePanel {
    pub fn new(n_brands: usize, households: Vec<Household>) -> Result<Self> {
        if households.is_empty() {
            return Err(Error::invalid("panel has no households"));
        }
        if let Some(h) = households.iter().find(|h| h.n_brands != n_brands) {
            return Err(Error::invalid(format!(
                "household {} has {} brands, panel has {n_brands}",
                h.id, h.n_brands
            )));
        }
        Ok(Self {
            n_brands,
            households,
        })
    }

    pub fn n_brands(&self) -> usize {
        self.n_brands
    }

    pub fn households(&self) -> &[Household] {
        &self.households
    }

    pub fn len(&self) -> usize {
        self.households.len()
    }

    pub fn is_empty(&self) -> bool {
        self.households.is_empty()
    }

    pub fn n_observations(&self) -> usize {
        self.households.iter().map(Household::n_periods).sum()
    }

    pub fn into_households(self) -> Vec<Household> {
        self.households
    }
}

/// Prices without outcomes, as produced by the price simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub n_brands: usize,
    pub n_periods: usize,
    /// One period-major price vector per household.
    pub households: Vec<Vec<f64>>,
}
