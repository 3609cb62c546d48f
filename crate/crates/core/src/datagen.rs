//! Synthetic scanner panels drawn from known mixture parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choicemodel::{
    brand_probabilities, category_value, incidence_probability, MixtureParameters,
};
use crate::error::{Error, Result};
use crate::panel::{ChoicePanel, Household, PricePanel};
use crate::reference::gain_loss;
use crate::reference::Branch;

/// Promotional price process applied independently per (period, brand).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceProcessConfig {
    pub base_prices: Vec<f64>,
    pub promo_probability: f64,
    /// Fractional discount during a promotion.
    pub promo_depth: f64,
    /// Standard deviation of the multiplicative log-normal jitter.
    pub noise_sd: f64,
}

impl Default for PriceProcessConfig {
    fn default() -> Self {
        Self {
            base_prices: vec![0.30, 0.32, 0.28, 0.25],
            promo_probability: 0.15,
            promo_depth: 0.2,
            noise_sd: 0.05,
        }
    }
}

impl PriceProcessConfig {
    pub fn validate(&self, n_brands: usize) -> Result<()> {
        if self.base_prices.len() != n_brands {
            return Err(Error::invalid(format!(
                "{} base prices for {n_brands} brands",
                self.base_prices.len()
            )));
        }
        if self.base_prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid("base prices must be positive"));
        }
        if !(0.0..=1.0).contains(&self.promo_probability) {
            return Err(Error::invalid("promo_probability must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.promo_depth) {
            return Err(Error::invalid("promo_depth must lie in [0, 1)"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::invalid("noise_sd must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub n_households: usize,
    pub n_periods: usize,
    pub truth: MixtureParameters,
    pub prices: PriceProcessConfig,
    pub seed: u64,
    /// One store-level price path for every household, or one path each.
    pub shared_prices: bool,
}

impl SimulationSpec {
    /// 350 households, 104 periods, shared prices, default price process.
    pub fn new(truth: MixtureParameters) -> Self {
        Self {
            n_households: 350,
            n_periods: 104,
            truth,
            prices: PriceProcessConfig::default(),
            seed: 0,
            shared_prices: true,
        }
    }

    pub fn n_brands(&self) -> usize {
        self.truth.n_brands()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_households == 0 {
            return Err(Error::invalid("need at least one household"));
        }
        if self.n_periods < 2 {
            return Err(Error::invalid("need at least two periods"));
        }
        self.prices.validate(self.n_brands())
    }
}

/// A simulated panel together with each household's true segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: ChoicePanel,
    pub segments: Vec<usize>,
}

fn household_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SHARED_PRICE_STREAM: u64 = 0;

fn price_path(cfg: &PriceProcessConfig, n_periods: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = cfg.base_prices.len();
    let mut out = Vec::with_capacity(n_periods * k);
    for _ in 0..n_periods {
        for base in &cfg.base_prices {
            let promo = rng.random::<f64>() < cfg.promo_probability;
            let z: f64 = StandardNormal.sample(rng);
            let discount = if promo { 1.0 - cfg.promo_depth } else { 1.0 };
            out.push(base * discount * (cfg.noise_sd * z).exp());
        }
    }
    out
}

/// Prices of every household; deterministic in the seed.
pub fn simulate_prices(spec: &SimulationSpec) -> Result<PricePanel> {
    spec.validate()?;
    let households = if spec.shared_prices {
        let mut rng = household_rng(spec.seed, SHARED_PRICE_STREAM);
        let path = price_path(&spec.prices, spec.n_periods, &mut rng);
        vec![path; spec.n_households]
    } else {
        (0..spec.n_households)
            .into_par_iter()
            .map(|i| {
                let mut rng = household_rng(spec.seed, i as u64 + 1);
                price_path(&spec.prices, spec.n_periods, &mut rng)
            })
            .collect()
    };
    Ok(PricePanel {
        n_brands: spec.n_brands(),
        n_periods: spec.n_periods,
        households,
    })
}

/// Draw index `i` with probability `weights[i]`.
fn categorical(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Full choice panel: one segment draw per household, then per period an
/// incidence draw and, on purchase, a brand draw.
pub fn simulate_panel(spec: &SimulationSpec) -> Result<SimulatedPanel> {
    let prices = simulate_prices(spec)?;
    let k = spec.n_brands();
    let drawn: Vec<(Household, usize)> = prices
        .households
        .into_par_iter()
        .enumerate()
        .map(|(i, path)| {
            // choice draws use a stream disjoint from the price streams
            let mut rng = household_rng(spec.seed, (1 << 32) + i as u64);
            let s = categorical(spec.truth.psi(), rng.random());
            let seg = &spec.truth.segments()[s];
            let pi = seg.pi.value();
            let mut r = path[..k].to_vec();
            let mut u = vec![0.0; k];
            let mut choices = Vec::with_capacity(spec.n_periods);
            for t in 0..spec.n_periods {
                if t > 0 {
                    for j in 0..k {
                        r[j] = pi * r[j] + (1.0 - pi) * path[(t - 1) * k + j];
                    }
                }
                for j in 0..k {
                    let p = path[t * k + j];
                    let dev = gain_loss(r[j], p);
                    let coef = match dev.branch {
                        Branch::Gain => seg.beta_gain,
                        Branch::Loss => seg.beta_loss,
                    };
                    u[j] = seg.intercept(j) + seg.beta_price * p + coef * dev.value;
                }
                let buy = incidence_probability(seg.alpha0, seg.alpha1, category_value(&u));
                let choice = if rng.random::<f64>() < buy {
                    Some(categorical(&brand_probabilities(&u), rng.random()))
                } else {
                    None
                };
                choices.push(choice);
            }
            let h = Household::new(i as u64 + 1, k, path, choices)
                .expect("simulated prices are positive and choices in range");
            (h, s)
        })
        .collect();
    let (households, segments): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    Ok(SimulatedPanel {
        panel: ChoicePanel::new(k, households)?,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choicemodel::SegmentParameters;
    use crate::reference::CarryoverWeight;

    fn truth(k: usize) -> MixtureParameters {
        MixtureParameters::single(SegmentParameters {
            pi: CarryoverWeight::new(0.4).unwrap(),
            alpha0: 0.5,
            alpha1: 1.0,
            intercepts: vec![0.2; k - 1],
            beta_gain: 1.0,
            beta_loss: 2.0,
            beta_price: -2.0,
        })
        .unwrap()
    }

    fn spec() -> SimulationSpec {
        let mut s = SimulationSpec::new(truth(3));
        s.n_households = 20;
        s.n_periods = 10;
        s.prices.base_prices = vec![1.0, 1.5, 2.0];
        s
    }

    #[test]
    fn flat_prices_without_noise_or_promotions() {
        let mut s = spec();
        s.prices.noise_sd = 0.0;
        s.prices.promo_probability = 0.0;
        s.shared_prices = false;
        let p = simulate_prices(&s).unwrap();
        for h in &p.households {
            for row in h.chunks(3) {
                assert_eq!(row, &[1.0, 1.5, 2.0]);
            }
        }
    }

    #[test]
    fn always_promoted() {
        let mut s = spec();
        s.prices.noise_sd = 0.0;
        s.prices.promo_probability = 1.0;
        s.prices.promo_depth = 0.2;
        let p = simulate_prices(&s).unwrap();
        for row in p.households[0].chunks(3) {
            for (price, base) in row.iter().zip(&[1.0, 1.5, 2.0]) {
                assert!((price - 0.8 * base).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let s = spec();
        assert_eq!(simulate_panel(&s).unwrap(), simulate_panel(&s).unwrap());
        let mut other = spec();
        other.seed = 1;
        assert_ne!(simulate_panel(&s).unwrap(), simulate_panel(&other).unwrap());
    }

    #[test]
    fn single_segment_assigns_everyone_to_it() {
        let out = simulate_panel(&spec()).unwrap();
        assert!(out.segments.iter().all(|s| *s == 0));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec();
        s.n_periods = 1;
        assert!(simulate_panel(&s).is_err());
        let mut s = spec();
        s.prices.base_prices = vec![1.0];
        assert!(simulate_panel(&s).is_err());
        let mut s = spec();
        s.prices.promo_depth = 1.0;
        assert!(simulate_panel(&s).is_err());
    }
}
