//! Joint estimation against the two-step grid search on the same panel.
//!
//! Both fitted parameter sets are scored on every period of the panel, so the
//! two log-likelihoods are comparable even though the two-step model was
//! fitted on the calibration periods only.

use crate::estimator::{self, EstimatorOptions, FitResult};
use crate::likelihood::Likelihood;
use crate::panel::ChoicePanel;
use crate::twostep::{self, GridSearchResult, TwoStepConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub joint: Option<FitResult>,
    pub twostep: Option<GridSearchResult>,
    pub joint_full_loglik: Option<f64>,
    pub twostep_full_loglik: Option<f64>,
    /// Two-step seconds over joint seconds.
    pub speed_ratio: Option<f64>,
    pub failures: Vec<String>,
}

impl Comparison {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn compare(panel: &ChoicePanel, opts: &EstimatorOptions, config: &TwoStepConfig) -> Comparison {
    let mut failures = Vec::new();
    let joint = match estimator::fit(panel, opts, None) {
        Ok(f) => Some(f),
        Err(e) => {
            failures.push(format!("joint estimation: {e}"));
            None
        }
    };
    let twostep = match twostep::grid_search(panel, config, opts) {
        Ok(g) => Some(g),
        Err(e) => {
            failures.push(format!("two-step estimation: {e}"));
            None
        }
    };
    let full = Likelihood::new(panel).with_eps(opts.eps);
    let mut score = |params: Option<&crate::MixtureParameters>, label: &str| {
        params.and_then(|p| match full.loglik(p) {
            Ok(v) => Some(v.total),
            Err(e) => {
                failures.push(format!("{label} full-panel scoring: {e}"));
                None
            }
        })
    };
    let joint_full_loglik = score(joint.as_ref().map(|f| &f.parameters), "joint");
    let twostep_full_loglik = score(twostep.as_ref().map(|g| &g.fit.parameters), "two-step");
    let speed_ratio = match (&joint, &twostep) {
        (Some(j), Some(t)) if j.wall_time > 0.0 => Some(t.wall_time / j.wall_time),
        _ => None,
    };
    Comparison {
        joint,
        twostep,
        joint_full_loglik,
        twostep_full_loglik,
        speed_ratio,
        failures,
    }
}
