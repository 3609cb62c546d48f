//! Segment-level utilities and the nested-logit purchase model.
//!
//! A household in segment `s` buys in the category with probability
//! `logistic(alpha0 + alpha1 * CV)`, where `CV` is the log-sum of the brand
//! utilities, and picks brand `j` with the softmax of those utilities. The
//! benchmark brand is the last one; its intercept is fixed at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::{self as refprice, gain_loss, heaviside, Branch, CarryoverWeight, PriceSeries};

/// Choice-model coefficients of one latent segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentParameters {
    pub pi: CarryoverWeight,
    pub alpha0: f64,
    pub alpha1: f64,
    /// Intercepts of brands `1..K-1`; the benchmark brand `K` has none.
    pub intercepts: Vec<f64>,
    pub beta_gain: f64,
    pub beta_loss: f64,
    pub beta_price: f64,
}

impl SegmentParameters {
    /// Number of brands implied by the intercept vector.
    pub fn n_brands(&self) -> usize {
        self.intercepts.len() + 1
    }

    /// Intercept of 0-based `brand`; zero for the benchmark brand.
    pub fn intercept(&self, brand: usize) -> f64 {
        self.intercepts.get(brand).copied().unwrap_or(0.0)
    }

    fn check_finite(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha1, self.beta_gain, self.beta_loss, self.beta_price];
        if all.iter().chain(&self.intercepts).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("segment coefficients must be finite"))
        }
    }
}

/// Latent-class mixture of segments with shares `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParameters {
    segments: Vec<SegmentParameters>,
    psi: Vec<f64>,
}

const SIMPLEX_TOL: f64 = 1e-12;

impl MixtureParameters {
    pub fn new(segments: Vec<SegmentParameters>, psi: Vec<f64>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("mixture needs at least one segment"));
        }
        if segments.len() != psi.len() {
            return Err(Error::invalid(format!(
                "{} segments but {} shares",
                segments.len(),
                psi.len()
            )));
        }
        let k = segments[0].n_brands();
        if k < 2 {
            return Err(Error::invalid("need at least 2 brands"));
        }
        for seg in &segments {
            if seg.n_brands() != k {
                return Err(Error::invalid("segments disagree on the number of brands"));
            }
            seg.check_finite()?;
        }
        if psi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid("segment shares must be positive"));
        }
        let total: f64 = psi.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("segment shares sum to {total}, not 1")));
        }
        Ok(Self { segments, psi })
    }

    pub fn single(segment: SegmentParameters) -> Result<Self> {
        Self::new(vec![segment], vec![1.0])
    }

    pub fn segments(&self) -> &[SegmentParameters] {
        &self.segments
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn n_brands(&self) -> usize {
        self.segments[0].n_brands()
    }

    pub fn into_parts(self) -> (Vec<SegmentParameters>, Vec<f64>) {
        (self.segments, self.psi)
    }
}

/// Shift applied to the gain indicator so that `r == p` never selects the gain coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 {
            Ok(Self(eps))
        } else {
            Err(Error::invalid(format!("epsilon must be positive, got {eps}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Self(1e-6)
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

fn check_brand(seg: &SegmentParameters, brand: usize) -> Result<()> {
    if brand >= seg.n_brands() {
        Err(Error::invalid(format!(
            "brand index {brand} out of range for {} brands",
            seg.n_brands()
        )))
    } else {
        Ok(())
    }
}

/// Utility of 0-based `brand` at 1-based `period` with the explicit gain/loss branch.
pub fn utility_branch(
    seg: &SegmentParameters,
    prices: &PriceSeries,
    period: usize,
    brand: usize,
) -> Result<f64> {
    check_brand(seg, brand)?;
    let r = refprice::reference_closed_form(prices, seg.pi, period)?;
    let p = prices.as_slice()[period - 1];
    let dev = gain_loss(r, p);
    let coef = match dev.branch {
        Branch::Gain => seg.beta_gain,
        Branch::Loss => seg.beta_loss,
    };
    Ok(seg.intercept(brand) + seg.beta_price * p + coef * dev.value)
}

/// Utility with the coefficient written as `beta_g^H(r-p-eps) * beta_l^H(-(r-p))`.
pub fn utility_heaviside(
    seg: &SegmentParameters,
    prices: &PriceSeries,
    period: usize,
    brand: usize,
    eps: Epsilon,
) -> Result<f64> {
    check_brand(seg, brand)?;
    let r = refprice::reference_closed_form(prices, seg.pi, period)?;
    let p = prices.as_slice()[period - 1];
    let dev = r - p;
    let coef = seg.beta_gain.powi(heaviside(dev - eps.value()))
        * seg.beta_loss.powi(heaviside(-dev));
    Ok(seg.intercept(brand) + seg.beta_price * p + dev * coef)
}

/// Max-shifted `log(sum(exp(v)))`; `-inf` for an empty slice or all `-inf` inputs.
pub(crate) fn lse(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(logistic(x))`.
pub(crate) fn log_logistic(x: f64) -> f64 {
    -softplus(-x)
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log of the conditional brand-choice probabilities.
pub fn log_brand_probabilities(utilities: &[f64]) -> Vec<f64> {
    let m = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = utilities.iter().map(|u| (u - m).exp()).sum::<f64>().ln();
    utilities.iter().map(|u| (u - m) - log_z).collect()
}

/// Brand-choice probabilities given purchase (softmax of utilities).
pub fn brand_probabilities(utilities: &[f64]) -> Vec<f64> {
    let m = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = utilities.iter().map(|u| (u - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Category value: log-sum-exp of the brand utilities.
pub fn category_value(utilities: &[f64]) -> f64 {
    lse(utilities)
}

pub fn log_incidence_probability(alpha0: f64, alpha1: f64, cv: f64) -> f64 {
    log_logistic(alpha0 + alpha1 * cv)
}

pub fn log_no_purchase_probability(alpha0: f64, alpha1: f64, cv: f64) -> f64 {
    log_logistic(-(alpha0 + alpha1 * cv))
}

/// Probability of buying in the category.
pub fn incidence_probability(alpha0: f64, alpha1: f64, cv: f64) -> f64 {
    log_incidence_probability(alpha0, alpha1, cv).exp()
}

/// Segment-conditional utilities of all brands at 1-based `period`.
pub fn segment_utilities(
    seg: &SegmentParameters,
    prices: &[PriceSeries],
    period: usize,
) -> Result<Vec<f64>> {
    if prices.len() != seg.n_brands() {
        return Err(Error::invalid(format!(
            "{} price series for {} brands",
            prices.len(),
            seg.n_brands()
        )));
    }
    prices
        .iter()
        .enumerate()
        .map(|(j, series)| utility_branch(seg, series, period, j))
        .collect()
}

/// Log of `Pr(j and buy)` for one segment.
pub fn log_joint_probability(
    seg: &SegmentParameters,
    prices: &[PriceSeries],
    period: usize,
    brand: usize,
) -> Result<f64> {
    check_brand(seg, brand)?;
    let u = segment_utilities(seg, prices, period)?;
    let cv = lse(&u);
    Ok(u[brand] - cv + log_incidence_probability(seg.alpha0, seg.alpha1, cv))
}

/// `Pr(j and buy) = Pr(j | buy) * Pr(buy)` for one segment.
pub fn joint_probability(
    seg: &SegmentParameters,
    prices: &[PriceSeries],
    period: usize,
    brand: usize,
) -> Result<f64> {
    log_joint_probability(seg, prices, period, brand).map(f64::exp)
}

/// Probability of not buying in the category for one segment.
pub fn no_purchase_probability(
    seg: &SegmentParameters,
    prices: &[PriceSeries],
    period: usize,
) -> Result<f64> {
    let u = segment_utilities(seg, prices, period)?;
    Ok(log_no_purchase_probability(seg.alpha0, seg.alpha1, lse(&u)).exp())
}

/// Share-weighted joint probability over all segments.
pub fn mixture_probability(
    mix: &MixtureParameters,
    prices: &[PriceSeries],
    period: usize,
    brand: usize,
) -> Result<f64> {
    let terms = mix
        .segments()
        .iter()
        .zip(mix.psi())
        .map(|(seg, psi)| Ok(psi.ln() + log_joint_probability(seg, prices, period, brand)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(lse(&terms).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    pub(crate) fn seg(pi: f64, intercepts: &[f64], g: f64, l: f64, p: f64) -> SegmentParameters {
        SegmentParameters {
            pi: CarryoverWeight::new(pi).unwrap(),
            alpha0: 0.0,
            alpha1: 0.0,
            intercepts: intercepts.to_vec(),
            beta_gain: g,
            beta_loss: l,
            beta_price: p,
        }
    }

    fn series(p: &[f64]) -> PriceSeries {
        PriceSeries::new(p.to_vec()).unwrap()
    }

    #[test]
    fn utility_branch_examples() {
        // brand index 1 of 2 is the benchmark brand (intercept 0)
        let s = seg(0.3, &[0.0], 0.5, 0.5, -1.0);
        assert_eq!(utility_branch(&s, &series(&[2.0, 2.0]), 2, 1).unwrap(), -2.0);

        let s = seg(0.4, &[1.0], 2.0, 5.0, 0.0);
        assert_eq!(utility_branch(&s, &series(&[3.0, 2.0]), 2, 0).unwrap(), 3.0);
        assert_eq!(utility_branch(&s, &series(&[2.0, 3.0]), 2, 0).unwrap(), -4.0);
    }

    #[test]
    fn heaviside_matches_branch_on_examples() {
        let eps = Epsilon::default();
        let s = seg(0.4, &[1.0], 2.0, 5.0, -0.7);
        for p in [[3.0, 2.0], [2.0, 3.0], [2.0, 2.0]] {
            let ps = series(&p);
            assert_eq!(
                utility_heaviside(&s, &ps, 2, 0, eps).unwrap(),
                utility_branch(&s, &ps, 2, 0).unwrap()
            );
        }
    }

    #[test]
    fn brand_probability_examples() {
        assert_eq!(brand_probabilities(&[0.0; 4]), vec![0.25; 4]);
        let p = brand_probabilities(&[1.0, 1.0 + 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert_eq!(brand_probabilities(&[1000.0, 1000.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn category_value_examples() {
        assert!((category_value(&[0.0, 0.0]) - LN_2).abs() < 1e-15);
        assert_eq!(category_value(&[-3.5]), -3.5);
        assert!((category_value(&[0.0, 3f64.ln()]) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn incidence_examples() {
        assert_eq!(incidence_probability(0.0, 0.0, 1.3), 0.5);
        assert!((incidence_probability(3f64.ln(), 0.0, 0.0) - 0.75).abs() < 1e-15);
        let tiny = incidence_probability(-745.0, 0.0, 0.0);
        assert!(tiny > 0.0);
        assert!((log_incidence_probability(-745.0, 0.0, 0.0) + 745.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_joint_probability() {
        let s = seg(0.5, &[0.0, 0.0, 0.0], 1.0, 1.0, -1.0);
        let prices = vec![series(&[1.0, 1.0]); 4];
        for j in 0..4 {
            let p = joint_probability(&s, &prices, 2, j).unwrap();
            assert!((p - 0.125).abs() < 1e-15);
        }
        let none = no_purchase_probability(&s, &prices, 2).unwrap();
        assert!((none - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixture_of_identical_segments() {
        let s = seg(0.2, &[0.4], 1.0, 2.0, -1.0);
        let prices = vec![series(&[1.0, 1.4, 0.9]), series(&[1.2, 1.0, 1.1])];
        let single = MixtureParameters::single(s.clone()).unwrap();
        let double = MixtureParameters::new(vec![s.clone(), s.clone()], vec![0.5, 0.5]).unwrap();
        let base = joint_probability(&s, &prices, 3, 0).unwrap();
        assert!((mixture_probability(&single, &prices, 3, 0).unwrap() - base).abs() < 1e-15);
        assert!((mixture_probability(&double, &prices, 3, 0).unwrap() - base).abs() < 1e-15);
    }

    #[test]
    fn mixture_validation() {
        let s = seg(0.2, &[0.4], 1.0, 2.0, -1.0);
        assert!(MixtureParameters::new(vec![s.clone()], vec![0.9]).is_err());
        assert!(MixtureParameters::new(vec![s.clone(), s.clone()], vec![1.0, 0.0]).is_err());
        assert!(MixtureParameters::new(vec![], vec![]).is_err());
        let mut three = s.clone();
        three.intercepts.push(0.0);
        assert!(MixtureParameters::new(vec![s, three], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn bad_brand_index() {
        let s = seg(0.2, &[0.4], 1.0, 2.0, -1.0);
        assert!(utility_branch(&s, &series(&[1.0]), 1, 2).is_err());
    }
}
