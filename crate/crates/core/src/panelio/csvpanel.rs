//! `household,period,brand,price,choice` panel files.
//!
//! One row per (household, period, brand). Brands and periods are 1-based and
//! a no-purchase period has `choice = 0` on every brand row. Rows may come in
//! any order on input; output is sorted by household, period, brand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{ChoicePanel, Household};

pub const PANEL_HEADER: &str = "household,period,brand,price,choice";

#[derive(Clone, Copy)]
struct Cell {
    price: f64,
    chosen: bool,
    line: usize,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: usize) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::parse(line, format!("missing {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {name} {raw:?}")))
}

pub fn parse_panel(text: &str) -> Result<ChoicePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .iter()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(",");
    if header != PANEL_HEADER {
        return Err(Error::parse(1, format!("expected header {PANEL_HEADER:?}, got {header:?}")));
    }

    // household -> period -> brand -> cell
    let mut rows: BTreeMap<u64, BTreeMap<usize, BTreeMap<usize, Cell>>> = BTreeMap::new();
    let mut n_brands = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let household: u64 = field(&rec, 0, "household", line)?;
        let period: usize = field(&rec, 1, "period", line)?;
        let brand: usize = field(&rec, 2, "brand", line)?;
        let price: f64 = field(&rec, 3, "price", line)?;
        let choice: u8 = field(&rec, 4, "choice", line)?;
        if period == 0 {
            return Err(Error::parse(line, "periods are numbered from 1"));
        }
        if brand == 0 {
            return Err(Error::parse(line, "brands are numbered from 1"));
        }
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::parse(line, format!("price must be positive, got {price}")));
        }
        if choice > 1 {
            return Err(Error::parse(line, format!("choice must be 0 or 1, got {choice}")));
        }
        n_brands = n_brands.max(brand);
        let cell = Cell {
            price,
            chosen: choice == 1,
            line,
        };
        let slot = rows.entry(household).or_default().entry(period).or_default();
        if let Some(prev) = slot.insert(brand, cell) {
            return Err(Error::parse(
                line,
                format!(
                    "duplicate row for household {household} period {period} brand {brand} (first at line {})",
                    prev.line
                ),
            ));
        }
    }
    if rows.is_empty() {
        return Err(Error::parse(1, "panel has no rows"));
    }
    if n_brands < 2 {
        return Err(Error::parse(1, "panel needs at least two brands"));
    }

    let mut households = Vec::with_capacity(rows.len());
    for (id, periods) in rows {
        let mut prices = Vec::with_capacity(periods.len() * n_brands);
        let mut choices = Vec::with_capacity(periods.len());
        for (expected, (period, brands)) in (1..).zip(&periods) {
            let first_line = brands.values().map(|c| c.line).min().unwrap_or(0);
            if *period != expected {
                return Err(Error::parse(
                    first_line,
                    format!("household {id}: period {expected} missing before period {period}"),
                ));
            }
            if brands.len() != n_brands {
                let missing: Vec<String> = (1..=n_brands)
                    .filter(|b| !brands.contains_key(b))
                    .map(|b| b.to_string())
                    .collect();
                return Err(Error::parse(
                    first_line,
                    format!(
                        "household {id} period {period}: missing brand row(s) {}",
                        missing.join(", ")
                    ),
                ));
            }
            let mut choice = None;
            for (brand, cell) in brands {
                prices.push(cell.price);
                if cell.chosen {
                    if choice.is_some() {
                        return Err(Error::parse(
                            cell.line,
                            format!("household {id} period {period}: more than one chosen brand"),
                        ));
                    }
                    choice = Some(brand - 1);
                }
            }
            choices.push(choice);
        }
        households.push(Household::new(id, n_brands, prices, choices)?);
    }
    ChoicePanel::new(n_brands, households)
}

pub fn read_panel(path: impl AsRef<Path>) -> Result<ChoicePanel> {
    parse_panel(&super::read_text(path.as_ref())?)
}

/// Canonical text form of a panel.
pub fn format_panel(panel: &ChoicePanel) -> String {
    let k = panel.n_brands();
    let mut hh: Vec<&Household> = panel.households().iter().collect();
    hh.sort_by_key(|h| h.id);
    let mut out = String::with_capacity(panel.n_observations() * k * 24);
    out.push_str(PANEL_HEADER);
    out.push('\n');
    for h in hh {
        for t in 0..h.n_periods() {
            let choice = h.choice(t);
            for (j, price) in h.prices_at(t).iter().enumerate() {
                let chosen = u8::from(choice == Some(j));
                let _ = writeln!(out, "{},{},{},{},{}", h.id, t + 1, j + 1, price, chosen);
            }
        }
    }
    out
}

pub fn write_panel(panel: &ChoicePanel, path: impl AsRef<Path>) -> Result<()> {
    super::write_text(path.as_ref(), &format_panel(panel))
}
