//! The two-step baseline: pick one pooled carry-over weight by grid search,
//! fitting the choice model conditionally at each grid value.
//!
//! Each household's earliest periods form the initialization sample. They
//! only warm up the reference prices; the conditional likelihood is scored
//! on the remaining calibration periods.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorOptions, FitResult, ParamLayout};
use crate::likelihood::Likelihood;
use crate::panel::ChoicePanel;
use crate::reference::CarryoverWeight;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepConfig {
    /// Candidate carry-over weights, strictly increasing in `[0, 1]`.
    pub grid: Vec<f64>,
    /// Fraction of each household's periods set aside for initialization.
    pub init_fraction: f64,
}

impl Default for TwoStepConfig {
    fn default() -> Self {
        Self {
            grid: grid_from_step(0.01).expect("0.01 is a valid step"),
            init_fraction: 0.3,
        }
    }
}

impl TwoStepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("grid is empty"));
        }
        if self.grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("grid values must lie in [0, 1]"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction < 1.0) {
            return Err(Error::invalid("init_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `0, step, 2 step, ...` up to 1 inclusive.
pub fn grid_from_step(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step {step} must lie in (0, 1]")));
    }
    let n = (1.0 / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((i as f64 * step) * 1e12).round() / 1e12)
        .map(|p: f64| p.min(1.0))
        .collect())
}

/// Number of initialization periods for a history of `n_periods`.
pub fn init_periods(n_periods: usize, init_fraction: f64) -> usize {
    (init_fraction * n_periods as f64 + 1e-9).floor() as usize
}

/// A panel divided per household into initialization and calibration periods.
#[derive(Debug, Clone)]
pub struct PanelSplit<'a> {
    panel: &'a ChoicePanel,
    init: Vec<usize>,
}

impl<'a> PanelSplit<'a> {
    pub fn panel(&self) -> &'a ChoicePanel {
        self.panel
    }

    /// Initialization period count of each household.
    pub fn init_periods(&self) -> &[usize] {
        &self.init
    }

    /// Likelihood over the calibration periods only.
    pub fn calibration_likelihood(&self, opts: &EstimatorOptions) -> Likelihood<'a> {
        Likelihood::new(self.panel)
            .with_eps(opts.eps)
            .with_scored_from(self.init.clone())
            .expect("split leaves calibration periods in every household")
    }
}

pub fn split_panel(panel: &ChoicePanel, init_fraction: f64) -> Result<PanelSplit<'_>> {
    if !(init_fraction > 0.0 && init_fraction < 1.0) {
        return Err(Error::invalid("init_fraction must lie in (0, 1)"));
    }
    let init: Vec<usize> = panel
        .households()
        .iter()
        .map(|h| init_periods(h.n_periods(), init_fraction))
        .collect();
    let short: Vec<String> = panel
        .households()
        .iter()
        .zip(&init)
        .filter(|(h, t0)| **t0 < 2 || h.n_periods() - **t0 < 2)
        .map(|(h, _)| h.id.to_string())
        .collect();
    if !short.is_empty() {
        return Err(Error::invalid(format!(
            "households too short to split at fraction {init_fraction}: {}",
            short.join(", ")
        )));
    }
    Ok(PanelSplit { panel, init })
}

/// Choice model fitted on the calibration periods with every segment's
/// carry-over weight fixed at `pi`.
pub fn fit_conditional(
    split: &PanelSplit<'_>,
    pi: CarryoverWeight,
    opts: &EstimatorOptions,
) -> Result<FitResult> {
    let layout = ParamLayout::new(opts.n_segments, split.panel.n_brands())?.with_pinned_pi(pi);
    estimator::fit_likelihood(&split.calibration_likelihood(opts), layout, opts, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub pi: f64,
    /// Calibration log-likelihood; `None` if the fit failed.
    pub loglik: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub pi_hat: f64,
    pub profile: Vec<GridPoint>,
    /// Conditional fit at `pi_hat`, with standard errors.
    pub fit: FitResult,
    /// Seconds for the whole search.
    pub wall_time: f64,
}

/// Conditional fits at every grid value; the best calibration log-likelihood
/// wins, ties going to the smaller value.
pub fn grid_search(
    panel: &ChoicePanel,
    config: &TwoStepConfig,
    opts: &EstimatorOptions,
) -> Result<GridSearchResult> {
    config.validate()?;
    opts.validate()?;
    let started = Instant::now();
    let split = split_panel(panel, config.init_fraction)?;
    let point_opts = EstimatorOptions {
        skip_standard_errors: true,
        ..opts.clone()
    };

    let fits: Vec<Result<FitResult>> = config
        .grid
        .par_iter()
        .map(|&pi| fit_conditional(&split, CarryoverWeight::new(pi)?, &point_opts))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let profile: Vec<GridPoint> = config
        .grid
        .iter()
        .zip(&fits)
        .enumerate()
        .map(|(i, (&pi, f))| match f {
            Ok(fit) => {
                if best.is_none_or(|(_, ll)| fit.loglik > ll) {
                    best = Some((i, fit.loglik));
                }
                GridPoint {
                    pi,
                    loglik: Some(fit.loglik),
                    converged: fit.converged,
                    error: None,
                }
            }
            Err(e) => GridPoint {
                pi,
                loglik: None,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let Some((winner, _)) = best else {
        let detail: Vec<String> = profile
            .iter()
            .map(|p| format!("pi={}: {}", p.pi, p.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Estimation(format!(
            "every grid point failed: {}",
            detail.join("; ")
        )));
    };

    let mut fit = fits
        .into_iter()
        .nth(winner)
        .expect("winner indexes the grid")
        .expect("winner is a successful fit");
    if !opts.skip_standard_errors {
        let pi_hat = CarryoverWeight::new(config.grid[winner])?;
        let layout = ParamLayout::new(opts.n_segments, panel.n_brands())?.with_pinned_pi(pi_hat);
        let lik = split.calibration_likelihood(opts);
        fit.std_errors = estimator::standard_errors_with(&lik, &layout, &fit.parameters)?;
        fit.significant = estimator::significance_flags(
            &fit.parameters,
            &fit.std_errors,
            estimator::SIGNIFICANCE_LEVEL,
        );
    }
    let wall_time = started.elapsed().as_secs_f64();
    fit.wall_time = wall_time;
    Ok(GridSearchResult {
        pi_hat: config.grid[winner],
        profile,
        fit,
        wall_time,
    })
}
