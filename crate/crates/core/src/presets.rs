//! Parameter sets shipped with the crate.

use crate::choicemodel::MixtureParameters;
use crate::error::Result;
use crate::panelio::{parse_config, Config};

/// Three-segment model with a carry-over weight per segment.
pub const REFORMULATION_3SEG: &str = include_str!("../presets/reformulation_3seg.toml");

/// Three-segment model sharing one pooled carry-over weight.
pub const TWOSTEP_3SEG: &str = include_str!("../presets/twostep_3seg.toml");

/// Log-likelihoods reported alongside the two parameter sets.
pub const REFORMULATION_LOGLIK: f64 = -56104.72;
pub const TWOSTEP_LOGLIK: f64 = -32656.34;

pub fn reformulation() -> Result<Config> {
    parse_config(REFORMULATION_3SEG)
}

pub fn twostep() -> Result<Config> {
    parse_config(TWOSTEP_3SEG)
}

/// First `n` segments of `mix` with shares renormalized.
pub fn leading_segments(mix: &MixtureParameters, n: usize) -> Result<MixtureParameters> {
    let s = mix.n_segments();
    if n == 0 || n > s {
        return Err(crate::error::Error::invalid(format!(
            "requested {n} segments, preset has {s}"
        )));
    }
    let total: f64 = mix.psi()[..n].iter().sum();
    let psi = mix.psi()[..n].iter().map(|p| p / total).collect();
    MixtureParameters::new(mix.segments()[..n].to_vec(), psi)
}
