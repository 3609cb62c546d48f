//! Versioned TOML configuration.
//!
//! A file carries a `schema` tag and any of the sections `[simulation]`,
//! `[truth]`, `[estimator]`, `[twostep]`. Every key inside a section is
//! required and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::choicemodel::{Epsilon, MixtureParameters, SegmentParameters};
use crate::datagen::{PriceProcessConfig, SimulationSpec};
use crate::error::{Error, Result};
use crate::estimator::EstimatorOptions;
use crate::twostep::{grid_from_step, TwoStepConfig};

pub const CONFIG_SCHEMA: &str = "refprice-config/1";

/// Panel dimensions and price process for the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub n_households: usize,
    pub n_periods: usize,
    pub seed: u64,
    pub shared_prices: bool,
    pub prices: PriceProcessConfig,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            n_households: 350,
            n_periods: 104,
            seed: 0,
            shared_prices: true,
            prices: PriceProcessConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub simulation: Option<SimulationSettings>,
    pub truth: Option<MixtureParameters>,
    pub estimator: Option<EstimatorOptions>,
    pub twostep: Option<TwoStepConfig>,
}

impl Config {
    /// Simulation spec from the `[simulation]` and `[truth]` sections.
    pub fn simulation_spec(&self) -> Result<SimulationSpec> {
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| Error::Config("missing [simulation] section".into()))?;
        let truth = self
            .truth
            .clone()
            .ok_or_else(|| Error::Config("missing [truth] section".into()))?;
        let spec = SimulationSpec {
            n_households: sim.n_households,
            n_periods: sim.n_periods,
            truth,
            prices: sim.prices.clone(),
            seed: sim.seed,
            shared_prices: sim.shared_prices,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    estimator: Option<RawEstimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    twostep: Option<RawTwoStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<RawSimulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<RawTruth>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    households: usize,
    periods: usize,
    seed: u64,
    shared_prices: bool,
    prices: PriceProcessConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTruth {
    psi: Vec<f64>,
    segment: Vec<SegmentParameters>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    segments: usize,
    starts: usize,
    seed: u64,
    eps: f64,
    max_iter: usize,
    grad_tol: f64,
    rel_tol: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTwoStep {
    init_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<f64>>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

pub fn parse_config(text: &str) -> Result<Config> {
    let table: toml::Table = text.parse().map_err(config_err)?;
    match table.get("schema").and_then(|v| v.as_str()) {
        Some(CONFIG_SCHEMA) => {}
        Some(other) => {
            return Err(Error::Config(format!(
                "schema version mismatch: expected {CONFIG_SCHEMA:?}, found {other:?}"
            )))
        }
        None => return Err(Error::Config(format!("missing schema = {CONFIG_SCHEMA:?}"))),
    }
    let raw: RawConfig = toml::from_str(text).map_err(config_err)?;

    let truth = raw
        .truth
        .map(|t| MixtureParameters::new(t.segment, t.psi))
        .transpose()
        .map_err(|e| Error::Config(format!("[truth]: {e}")))?;

    let simulation = raw.simulation.map(|s| SimulationSettings {
        n_households: s.households,
        n_periods: s.periods,
        seed: s.seed,
        shared_prices: s.shared_prices,
        prices: s.prices,
    });
    if let Some(sim) = &simulation {
        if sim.n_households == 0 || sim.n_periods < 2 {
            return Err(Error::Config(
                "[simulation]: need at least 1 household and 2 periods".into(),
            ));
        }
        if let Some(t) = &truth {
            sim.prices
                .validate(t.n_brands())
                .map_err(|e| Error::Config(format!("[simulation.prices]: {e}")))?;
        }
    }

    let estimator = raw
        .estimator
        .map(|e| -> Result<EstimatorOptions> {
            let opts = EstimatorOptions {
                n_segments: e.segments,
                eps: Epsilon::new(e.eps)?,
                starts: e.starts,
                seed: e.seed,
                max_iter: e.max_iter,
                grad_tol: e.grad_tol,
                rel_tol: e.rel_tol,
                skip_standard_errors: false,
            };
            opts.validate()?;
            Ok(opts)
        })
        .transpose()
        .map_err(|e| Error::Config(format!("[estimator]: {e}")))?;

    let twostep = raw
        .twostep
        .map(|t| -> Result<TwoStepConfig> {
            let grid = match (t.grid_step, t.grid) {
                (Some(step), None) => grid_from_step(step)?,
                (None, Some(grid)) => grid,
                _ => return Err(Error::invalid("give exactly one of grid_step and grid")),
            };
            let cfg = TwoStepConfig {
                grid,
                init_fraction: t.init_fraction,
            };
            cfg.validate()?;
            Ok(cfg)
        })
        .transpose()
        .map_err(|e| Error::Config(format!("[twostep]: {e}")))?;

    Ok(Config {
        simulation,
        truth,
        estimator,
        twostep,
    })
}

pub fn read_config(path: impl AsRef<Path>) -> Result<Config> {
    parse_config(&super::read_text(path.as_ref())?)
}

/// Step that regenerates `grid`, if there is one.
fn step_of(grid: &[f64]) -> Option<f64> {
    let step = match grid {
        [0.0] => 1.0,
        [0.0, second, ..] => *second,
        _ => return None,
    };
    (grid_from_step(step).ok()? == grid).then_some(step)
}

pub fn format_config(cfg: &Config) -> Result<String> {
    let raw = RawConfig {
        schema: CONFIG_SCHEMA.to_string(),
        estimator: cfg.estimator.as_ref().map(|e| RawEstimator {
            segments: e.n_segments,
            starts: e.starts,
            seed: e.seed,
            eps: e.eps.value(),
            max_iter: e.max_iter,
            grad_tol: e.grad_tol,
            rel_tol: e.rel_tol,
        }),
        twostep: cfg.twostep.as_ref().map(|t| match step_of(&t.grid) {
            Some(step) => RawTwoStep {
                init_fraction: t.init_fraction,
                grid_step: Some(step),
                grid: None,
            },
            None => RawTwoStep {
                init_fraction: t.init_fraction,
                grid_step: None,
                grid: Some(t.grid.clone()),
            },
        }),
        simulation: cfg.simulation.as_ref().map(|s| RawSimulation {
            households: s.n_households,
            periods: s.n_periods,
            seed: s.seed,
            shared_prices: s.shared_prices,
            prices: s.prices.clone(),
        }),
        truth: cfg.truth.as_ref().map(|m| RawTruth {
            psi: m.psi().to_vec(),
            segment: m.segments().to_vec(),
        }),
    };
    toml::to_string(&raw).map_err(config_err)
}

pub fn write_config(cfg: &Config, path: impl AsRef<Path>) -> Result<()> {
    super::write_text(path.as_ref(), &format_config(cfg)?)
}
