//! Likelihood computed directly on the probability scale.

use refprice::{ChoicePanel, Household, MixtureParameters, SegmentParameters};

/// Outcome probability computed directly on the probability scale.
pub fn direct_probability(seg: &SegmentParameters, h: &Household, t: usize, r: &[f64]) -> f64 {
    let k = h.n_brands();
    let p = h.prices_at(t);
    let e: Vec<f64> = (0..k)
        .map(|j| {
            let dev = r[j] - p[j];
            let coef = if dev > 1e-6 { seg.beta_gain } else { seg.beta_loss };
            let b = if j + 1 < k { seg.intercepts[j] } else { 0.0 };
            (b + seg.beta_price * p[j] + coef * dev).exp()
        })
        .collect();
    let z: f64 = e.iter().sum();
    let buy = 1.0 / (1.0 + (-(seg.alpha0 + seg.alpha1 * z.ln())).exp());
    match h.choice(t) {
        Some(c) => e[c] / z * buy,
        None => 1.0 - buy,
    }
}

/// Product of per-period outcome probabilities of one household under one segment.
pub fn direct_household(seg: &SegmentParameters, h: &Household) -> f64 {
    let pi = seg.pi.value();
    let mut r = h.prices_at(0).to_vec();
    let mut prod = 1.0;
    for t in 0..h.n_periods() {
        if t > 0 {
            let prev = h.prices_at(t - 1);
            r = r.iter().zip(prev).map(|(r, p)| pi * r + (1.0 - pi) * p).collect();
        }
        prod *= direct_probability(seg, h, t, &r);
    }
    prod
}

pub fn brute_force(panel: &ChoicePanel, mix: &MixtureParameters) -> f64 {
    panel
        .households()
        .iter()
        .map(|h| {
            mix.segments()
                .iter()
                .zip(mix.psi())
                .map(|(s, psi)| psi * direct_household(s, h))
                .sum::<f64>()
                .ln()
        })
        .sum()
}
