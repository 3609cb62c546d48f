//! Joint maximum-likelihood estimation of all segment parameters, carry-over
//! weights included.

mod bfgs;
mod inference;
mod layout;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use bfgs::{minimize, BfgsOptions, BfgsOutcome};
pub use inference::{
    estimates_table, significance_flag, significance_flags, two_sided_p_value, unconstrained_gradient,
    SegmentTable,
};
pub use layout::{Packed, ParamLayout, UnconstrainedVector, PI_CLAMP};

use crate::choicemodel::{Epsilon, MixtureParameters};
use crate::error::{Error, Result};
use crate::likelihood::Likelihood;
use crate::panel::ChoicePanel;

/// Significance level for the reported stars.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOptions {
    pub n_segments: usize,
    pub eps: Epsilon,
    /// Number of optimizer starts; the first is deterministic.
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    /// Skip the Hessian and report no standard errors.
    pub skip_standard_errors: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            n_segments: 3,
            eps: Epsilon::default(),
            starts: 8,
            seed: 0,
            max_iter: 1000,
            grad_tol: 1e-5,
            rel_tol: 1e-9,
            skip_standard_errors: false,
        }
    }
}

impl EstimatorOptions {
    pub fn with_segments(mut self, n: usize) -> Self {
        self.n_segments = n;
        self
    }

    pub fn with_starts(mut self, n: usize) -> Self {
        self.starts = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::invalid("number of segments must be at least 1"));
        }
        if self.starts == 0 {
            return Err(Error::invalid("number of starts must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.grad_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            rel_tol: self.rel_tol,
            ..BfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub floor_events: usize,
    /// Euclidean norm of the unconstrained gradient at the returned point.
    pub gradient_norm: f64,
    pub best_start: usize,
    pub pi_clamped: bool,
    pub n_parameters: usize,
    pub n_observations: usize,
    /// Log-likelihood of the winning start after each accepted iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub parameters: MixtureParameters,
    /// Carry-over weight shared by all segments when it was held fixed.
    pub pinned_pi: Option<f64>,
    pub std_errors: Vec<SegmentTable<Option<f64>>>,
    pub significant: Vec<SegmentTable<Option<bool>>>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Seconds.
    pub wall_time: f64,
    pub n_restarts_used: usize,
    pub diagnostics: FitDiagnostics,
}

/// Joint estimation on the whole panel.
pub fn fit(
    panel: &ChoicePanel,
    opts: &EstimatorOptions,
    init: Option<&MixtureParameters>,
) -> Result<FitResult> {
    let layout = ParamLayout::new(opts.n_segments, panel.n_brands())?;
    let lik = Likelihood::new(panel).with_eps(opts.eps);
    fit_likelihood(&lik, layout, opts, init)
}

/// Standard errors of `mix` on the whole panel.
pub fn standard_errors(
    panel: &ChoicePanel,
    mix: &MixtureParameters,
) -> Result<Vec<SegmentTable<Option<f64>>>> {
    let layout = ParamLayout::new(mix.n_segments(), panel.n_brands())?;
    inference::standard_errors_at(&Likelihood::new(panel), &layout, mix)
}

pub(crate) fn standard_errors_with(
    lik: &Likelihood<'_>,
    layout: &ParamLayout,
    mix: &MixtureParameters,
) -> Result<Vec<SegmentTable<Option<f64>>>> {
    inference::standard_errors_at(lik, layout, mix)
}

/// Sort segments by ascending carry-over weight, ties by ascending price
/// coefficient, permuting the shares alongside.
pub fn canonicalize_segments(mix: &MixtureParameters) -> MixtureParameters {
    let mut order: Vec<usize> = (0..mix.n_segments()).collect();
    let segs = mix.segments();
    order.sort_by(|&a, &b| {
        segs[a]
            .pi
            .value()
            .total_cmp(&segs[b].pi.value())
            .then(segs[a].beta_price.total_cmp(&segs[b].beta_price))
    });
    let segments = order.iter().map(|&i| segs[i].clone()).collect();
    let psi = order.iter().map(|&i| mix.psi()[i]).collect();
    MixtureParameters::new(segments, psi).expect("a permutation of a valid mixture is valid")
}

/// Starting vectors: the deterministic start (or `init`), then seeded draws.
fn starting_points(
    lik: &Likelihood<'_>,
    layout: &ParamLayout,
    opts: &EstimatorOptions,
    init: Option<&MixtureParameters>,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut clamped = false;
    let first = match init {
        Some(mix) => {
            let p = layout.pack(mix)?;
            clamped = p.pi_clamped;
            p.vector.0
        }
        None => deterministic_start(lik, layout, opts)?,
    };
    let mut starts = vec![first];
    for i in 1..opts.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        starts.push(random_start(layout, &mut rng));
    }
    Ok((starts, clamped))
}

/// Quantile `(s + 0.5) / S` of segment `s`.
fn spread(s: usize, n: usize) -> f64 {
    (s as f64 + 0.5) / n as f64
}

/// All zeros for one segment. With several segments, the coefficients of a
/// one-segment pilot fit are copied into every segment, which are then
/// pulled apart by spreading their carry-over weights and incidence
/// intercepts; shares start equal.
fn deterministic_start(
    lik: &Likelihood<'_>,
    layout: &ParamLayout,
    opts: &EstimatorOptions,
) -> Result<Vec<f64>> {
    let n_seg = layout.n_segments();
    let mut v = vec![0.0; layout.len()];
    if n_seg == 1 {
        return Ok(v);
    }
    let pilot_layout = match layout.pinned_pi() {
        Some(pi) => ParamLayout::new(1, layout.n_brands())?.with_pinned_pi(pi),
        None => ParamLayout::new(1, layout.n_brands())?,
    };
    let pilot = minimize(objective(lik, &pilot_layout), &vec![0.0; pilot_layout.len()], &opts.bfgs());
    let pilot_v = if pilot.f.is_finite() {
        pilot.x
    } else {
        vec![0.0; pilot_layout.len()]
    };
    let w = pilot_layout.len();
    let free_pi = layout.pinned_pi().is_none();
    let alpha0 = usize::from(free_pi);
    for s in 0..n_seg {
        let seg = &mut v[s * w..(s + 1) * w];
        seg.copy_from_slice(&pilot_v);
        let q = spread(s, n_seg);
        if free_pi {
            seg[0] = (q / (1.0 - q)).ln();
        }
        seg[alpha0] += q - 0.5;
    }
    Ok(v)
}

/// Negated log-likelihood and gradient in the unconstrained space.
fn objective<'a>(
    lik: &'a Likelihood<'_>,
    layout: &'a ParamLayout,
) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) + 'a {
    move |x: &[f64]| match inference::unconstrained_gradient(lik, layout, x) {
        Ok((ll, g)) => (-ll, g.into_iter().map(|v| -v).collect()),
        Err(_) => (f64::INFINITY, vec![f64::NAN; x.len()]),
    }
}

fn random_start(layout: &ParamLayout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pinned = layout.pinned_pi().is_some();
    let w = crate::likelihood::segment_width(layout.n_brands()) - usize::from(pinned);
    let share0 = layout.n_segments() * w;
    (0..layout.len())
        .map(|i| {
            if i < share0 && !pinned && i % w == 0 {
                rng.random_range(-2.0..2.0)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect()
}

struct StartOutcome {
    index: usize,
    outcome: BfgsOutcome,
}

pub(crate) fn fit_likelihood(
    lik: &Likelihood<'_>,
    layout: ParamLayout,
    opts: &EstimatorOptions,
    init: Option<&MixtureParameters>,
) -> Result<FitResult> {
    opts.validate()?;
    let started = Instant::now();
    let (starts, pi_clamped) = starting_points(lik, &layout, opts, init)?;
    let bfgs_opts = opts.bfgs();

    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .enumerate()
        .map(|(index, x0)| {
            StartOutcome {
                index,
                outcome: minimize(objective(lik, &layout), x0, &bfgs_opts),
            }
        })
        .collect();

    let mut best: Option<&StartOutcome> = None;
    for o in &outcomes {
        if !o.outcome.f.is_finite() {
            continue;
        }
        if best.is_none_or(|b| o.outcome.f < b.outcome.f) {
            best = Some(o);
        }
    }
    let Some(best) = best else {
        return Err(Error::Estimation(format!(
            "objective was non-finite at all {} starts",
            outcomes.len()
        )));
    };

    let parameters = canonicalize_segments(&layout.unpack(&best.outcome.x)?);
    let value = lik.loglik(&parameters)?;
    let std_errors = if opts.skip_standard_errors {
        (0..layout.n_segments())
            .map(|s| estimates_table(&parameters, s).map(|_| None))
            .collect()
    } else {
        inference::standard_errors_at(lik, &layout, &parameters)?
    };
    let significant = significance_flags(&parameters, &std_errors, SIGNIFICANCE_LEVEL);
    let gradient_norm = best.outcome.grad.iter().map(|g| g * g).sum::<f64>().sqrt();

    Ok(FitResult {
        pinned_pi: layout.pinned_pi().map(f64::from),
        std_errors,
        significant,
        loglik: value.total,
        converged: best.outcome.converged,
        iterations: best.outcome.iterations,
        wall_time: started.elapsed().as_secs_f64(),
        n_restarts_used: outcomes.len(),
        diagnostics: FitDiagnostics {
            floor_events: value.floor_events,
            gradient_norm,
            best_start: best.index,
            pi_clamped,
            n_parameters: layout.len(),
            n_observations: lik.panel().n_observations(),
            trace: best.outcome.trace.iter().map(|f| -f).collect(),
        },
        parameters,
    })
}
