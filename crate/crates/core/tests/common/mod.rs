//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refprice::datagen::{simulate_panel, SimulationSpec};
use refprice::{CarryoverWeight, ChoicePanel, Household, MixtureParameters, SegmentParameters};

pub mod cli;
pub mod corpus;
pub mod oracle;

pub fn seg(
    pi: f64,
    alpha0: f64,
    alpha1: f64,
    intercepts: &[f64],
    beta_gain: f64,
    beta_loss: f64,
    beta_price: f64,
) -> SegmentParameters {
    SegmentParameters {
        pi: CarryoverWeight::new(pi).unwrap(),
        alpha0,
        alpha1,
        intercepts: intercepts.to_vec(),
        beta_gain,
        beta_loss,
        beta_price,
    }
}

/// Two-segment truth with short and long price memory.
pub fn two_segment_truth() -> MixtureParameters {
    MixtureParameters::new(
        vec![
            seg(0.10, 0.5, 0.8, &[0.8, 0.4, 0.3], 3.0, 8.0, -3.0),
            seg(0.65, -0.5, 1.2, &[0.2, 0.9, 0.5], 4.0, 10.0, -2.0),
        ],
        vec![0.4, 0.6],
    )
    .unwrap()
}

/// Single-segment truth with `pi = 0.40`.
pub fn one_segment_truth() -> MixtureParameters {
    MixtureParameters::single(seg(0.40, 0.5, 0.8, &[0.8, 0.4, 0.3], 3.0, 8.0, -3.0)).unwrap()
}

/// Simulation spec with unit-scale base prices and deep, noisy promotions.
pub fn spec(truth: MixtureParameters, n: usize, t: usize, seed: u64, shared: bool) -> SimulationSpec {
    let mut spec = SimulationSpec::new(truth);
    spec.n_households = n;
    spec.n_periods = t;
    spec.prices.base_prices = vec![1.0, 1.1, 0.9, 0.8];
    spec.prices.promo_depth = 0.3;
    spec.prices.noise_sd = 0.1;
    spec.seed = seed;
    spec.shared_prices = shared;
    spec
}

pub fn simulate(spec: &SimulationSpec) -> ChoicePanel {
    simulate_panel(spec).unwrap().panel
}

/// Five households, eight periods, three brands, every outcome represented.
pub fn small_panel() -> ChoicePanel {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let households = (0..5u64)
        .map(|id| {
            let prices: Vec<f64> = (0..8 * 3).map(|_| rng.random_range(0.8..1.6)).collect();
            let choices = (0..8)
                .map(|t| match (t * 3 + id as usize * 5) % 4 {
                    3 => None,
                    c => Some(c),
                })
                .collect();
            Household::new(id + 1, 3, prices, choices).unwrap()
        })
        .collect();
    ChoicePanel::new(3, households).unwrap()
}

/// Two-segment parameters for [`small_panel`].
pub fn small_mixture() -> MixtureParameters {
    MixtureParameters::new(
        vec![
            seg(0.3, 0.2, 0.6, &[0.5, -0.3], 1.2, 2.5, -1.5),
            seg(0.7, -0.4, 1.1, &[-0.2, 0.4], 0.8, 1.9, -2.2),
        ],
        vec![0.45, 0.55],
    )
    .unwrap()
}
