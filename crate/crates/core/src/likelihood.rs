//! Household and finite-mixture log-likelihoods.
//!
//! Segment membership is a household-level latent variable: each household's
//! whole purchase history is scored under every segment and the segments are
//! mixed with `log sum_s exp(log psi_s + l_is)`. Every (household, period)
//! contributes exactly one outcome probability, either `Pr(j and buy)` or
//! `Pr(no purchase)`.
//!
//! Reference prices are advanced with the recursion here; the closed-form
//! path in [`crate::choicemodel`] is the independent check.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::choicemodel::{lse, log_logistic, logistic, Epsilon, MixtureParameters, SegmentParameters};
use crate::error::{Error, Result};
use crate::panel::{ChoicePanel, Household};

/// Per-term log-probabilities below this value are clamped to it.
pub const LOG_PROB_FLOOR: f64 = -745.0;

/// Natural-scale coefficients per segment: pi, alpha0, alpha1, K-1 intercepts, gain, loss, price.
pub(crate) fn segment_width(n_brands: usize) -> usize {
    n_brands + 5
}

pub(crate) mod slot {
    pub const PI: usize = 0;
    pub const ALPHA0: usize = 1;
    pub const ALPHA1: usize = 2;
    pub const INTERCEPT0: usize = 3;

    pub fn gain(k: usize) -> usize {
        k + 2
    }
    pub fn loss(k: usize) -> usize {
        k + 3
    }
    pub fn price(k: usize) -> usize {
        k + 4
    }
}

/// Panel log-likelihood with its per-household decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihoodValue {
    pub total: f64,
    pub per_household: Vec<f64>,
    /// Number of per-term log-probabilities clamped at [`LOG_PROB_FLOOR`].
    pub floor_events: usize,
}

/// `log(sum(exp(values)))` with a max shift.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("log_sum_exp of an empty list"));
    }
    Ok(lse(values))
}

/// Log-likelihood of one household's full history under a single segment.
pub fn household_segment_loglik(h: &Household, seg: &SegmentParameters) -> f64 {
    segment_terms(h, seg, Epsilon::default(), 0, None).0
}

/// Finite-mixture log-likelihood of a panel.
pub fn mixture_loglik(panel: &ChoicePanel, mix: &MixtureParameters) -> Result<LogLikelihoodValue> {
    Likelihood::new(panel).loglik(mix)
}

/// A panel paired with evaluation settings.
///
/// Households that share a price path and scoring window are grouped; for
/// each group the per-period outcome log-probabilities (and their gradients)
/// are tabulated once per segment and looked up per household.
#[derive(Debug, Clone)]
pub struct Likelihood<'a> {
    panel: &'a ChoicePanel,
    eps: Epsilon,
    scored_from: Option<Vec<usize>>,
    groups: Groups,
}

#[derive(Debug, Clone, Default)]
struct Groups {
    /// Group of each household; `None` for households with a unique price path.
    of: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
}

impl Groups {
    fn build(panel: &ChoicePanel, scored_from: Option<&[usize]>) -> Self {
        let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut raw = Vec::with_capacity(panel.len());
        for (i, h) in panel.households().iter().enumerate() {
            let t0 = scored_from.map_or(0, |v| v[i]);
            let key = (t0, h.prices().iter().map(|p| p.to_bits()).collect());
            let next = members.len();
            let g = *index.entry(key).or_insert(next);
            if g == next {
                members.push(Vec::new());
            }
            members[g].push(i);
            raw.push(g);
        }
        // only groups with at least two members are tabulated
        let mut renumber = vec![None; members.len()];
        let mut kept = Vec::new();
        for (g, m) in members.into_iter().enumerate() {
            if m.len() > 1 {
                renumber[g] = Some(kept.len());
                kept.push(m);
            }
        }
        Self {
            of: raw.into_iter().map(|g| renumber[g]).collect(),
            members: kept,
        }
    }
}

pub(crate) struct MixtureEval {
    pub loglik: f64,
    pub per_household: Vec<f64>,
    pub floor_events: usize,
    /// Natural-scale gradient, `S * segment_width` entries, when requested.
    pub segment_grad: Option<Vec<f64>>,
    /// Sum over households of posterior segment probabilities.
    pub posterior_sums: Option<Vec<f64>>,
}

impl<'a> Likelihood<'a> {
    pub fn new(panel: &'a ChoicePanel) -> Self {
        Self {
            panel,
            eps: Epsilon::default(),
            scored_from: None,
            groups: Groups::build(panel, None),
        }
    }

    pub fn with_eps(mut self, eps: Epsilon) -> Self {
        self.eps = eps;
        self
    }

    /// Score only 0-based periods `scored_from[i]..` of household `i`.
    ///
    /// Reference prices are still accumulated from period 1.
    pub fn with_scored_from(mut self, scored_from: Vec<usize>) -> Result<Self> {
        if scored_from.len() != self.panel.len() {
            return Err(Error::invalid("scored_from must have one entry per household"));
        }
        for (h, &t0) in self.panel.households().iter().zip(&scored_from) {
            if t0 >= h.n_periods() {
                return Err(Error::invalid(format!(
                    "household {} has no periods left to score",
                    h.id
                )));
            }
        }
        self.groups = Groups::build(self.panel, Some(&scored_from));
        self.scored_from = Some(scored_from);
        Ok(self)
    }

    /// Evaluate every household on its own, without shared tables.
    #[cfg(test)]
    pub(crate) fn ungrouped(mut self) -> Self {
        self.groups = Groups {
            of: vec![None; self.panel.len()],
            members: Vec::new(),
        };
        self
    }

    pub fn panel(&self) -> &'a ChoicePanel {
        self.panel
    }

    pub fn eps(&self) -> Epsilon {
        self.eps
    }

    fn first_scored(&self, i: usize) -> usize {
        self.scored_from.as_ref().map_or(0, |v| v[i])
    }

    pub fn loglik(&self, mix: &MixtureParameters) -> Result<LogLikelihoodValue> {
        if mix.n_brands() != self.panel.n_brands() {
            return Err(Error::invalid(format!(
                "parameters have {} brands, panel has {}",
                mix.n_brands(),
                self.panel.n_brands()
            )));
        }
        let e = self.evaluate(mix, false);
        Ok(LogLikelihoodValue {
            total: e.loglik,
            per_household: e.per_household,
            floor_events: e.floor_events,
        })
    }

    pub(crate) fn evaluate(&self, mix: &MixtureParameters, want_grad: bool) -> MixtureEval {
        let n_seg = mix.n_segments();
        let k = self.panel.n_brands();
        let width = segment_width(k);
        let row_len = n_seg * width + n_seg;
        let log_psi: Vec<f64> = mix.psi().iter().map(|p| p.ln()).collect();
        let households = self.panel.households();

        let tables: Vec<Vec<OutcomeTable>> = self
            .groups
            .members
            .par_iter()
            .map(|m| {
                let i = m[0];
                mix.segments()
                    .iter()
                    .map(|seg| {
                        OutcomeTable::build(&households[i], seg, self.eps, self.first_scored(i), want_grad)
                    })
                    .collect()
            })
            .collect();

        let contributions: Vec<HouseholdContribution> = households
            .par_iter()
            .enumerate()
            .map(|(i, h)| {
                let t0 = self.first_scored(i);
                let mut seg_ll = vec![0.0; n_seg];
                let mut floors = 0;
                let mut seg_grad = Vec::new();
                match self.groups.of[i] {
                    Some(g) => {
                        for (s, table) in tables[g].iter().enumerate() {
                            let (ll, f) = table.score(h, t0);
                            seg_ll[s] = ll;
                            floors += f;
                        }
                    }
                    None => {
                        if want_grad {
                            seg_grad = vec![0.0; n_seg * width];
                        }
                        for (s, seg) in mix.segments().iter().enumerate() {
                            let g = want_grad.then(|| &mut seg_grad[s * width..(s + 1) * width]);
                            let (ll, f) = segment_terms(h, seg, self.eps, t0, g);
                            seg_ll[s] = ll;
                            floors += f;
                        }
                    }
                }
                let joint: Vec<f64> = log_psi.iter().zip(&seg_ll).map(|(a, b)| a + b).collect();
                let ll = lse(&joint);
                let posterior: Vec<f64> = joint.iter().map(|j| (j - ll).exp()).collect();
                let mut row = Vec::new();
                if want_grad && !seg_grad.is_empty() {
                    // d ll / d theta_s = w_s * d l_s / d theta_s, w_s the posterior
                    row = vec![0.0; row_len];
                    for (s, w) in posterior.iter().enumerate() {
                        for (dst, src) in row[s * width..(s + 1) * width]
                            .iter_mut()
                            .zip(&seg_grad[s * width..(s + 1) * width])
                        {
                            *dst = w * src;
                        }
                        row[n_seg * width + s] = *w;
                    }
                }
                HouseholdContribution {
                    ll,
                    row,
                    posterior,
                    floors,
                }
            })
            .collect();

        let per_household: Vec<f64> = contributions.iter().map(|c| c.ll).collect();
        let loglik = pairwise_sum(&per_household);
        let floor_events = contributions.iter().map(|c| c.floors).sum();
        if !want_grad {
            return MixtureEval {
                loglik,
                per_household,
                floor_events,
                segment_grad: None,
                posterior_sums: None,
            };
        }

        let group_rows: Vec<Vec<f64>> = self
            .groups
            .members
            .par_iter()
            .zip(&tables)
            .map(|(m, seg_tables)| {
                let mut row = vec![0.0; row_len];
                for (s, table) in seg_tables.iter().enumerate() {
                    let weights: Vec<f64> = m.iter().map(|&i| contributions[i].posterior[s]).collect();
                    let members: Vec<&Household> = m.iter().map(|&i| &households[i]).collect();
                    table.weighted_gradient(&members, &weights, &mut row[s * width..(s + 1) * width]);
                    row[n_seg * width + s] = pairwise_sum(&weights);
                }
                row
            })
            .collect();

        // one row per singleton household, one per group at its first member
        let mut rows: Vec<&[f64]> = Vec::new();
        for (i, c) in contributions.iter().enumerate() {
            match self.groups.of[i] {
                None => rows.push(&c.row),
                Some(g) if self.groups.members[g][0] == i => rows.push(&group_rows[g]),
                Some(_) => {}
            }
        }
        let mut total = pairwise_sum_rows(&rows, row_len);
        let post = total.split_off(n_seg * width);
        MixtureEval {
            loglik,
            per_household,
            floor_events,
            segment_grad: Some(total),
            posterior_sums: Some(post),
        }
    }
}

struct HouseholdContribution {
    ll: f64,
    row: Vec<f64>,
    posterior: Vec<f64>,
    floors: usize,
}

/// Fixed-order pairwise summation; the result depends only on the input order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn pairwise_sum_rows(rows: &[&[f64]], width: usize) -> Vec<f64> {
    match rows.len() {
        0 => vec![0.0; width],
        1 => rows[0].to_vec(),
        n => {
            let (a, b) = rows.split_at(n / 2);
            let mut left = pairwise_sum_rows(a, width);
            let right = pairwise_sum_rows(b, width);
            for (l, r) in left.iter_mut().zip(&right) {
                *l += r;
            }
            left
        }
    }
}

/// Segment-level quantities of one period, shared by every outcome.
struct PeriodState<'p> {
    prices: &'p [f64],
    u: Vec<f64>,
    dev: Vec<f64>,
    gain: Vec<bool>,
    dr: Vec<f64>,
    cv: f64,
    eta: f64,
}

/// Advances reference prices and their `pi` derivative over a price path and
/// calls `visit` for every 0-based period from `first_scored` on.
fn walk_periods<'p>(
    h: &'p Household,
    seg: &SegmentParameters,
    eps: Epsilon,
    first_scored: usize,
    mut visit: impl FnMut(usize, &PeriodState<'p>),
) {
    let k = h.n_brands();
    let pi = seg.pi.value();
    let eps = eps.value();
    let mut r = h.prices_at(0).to_vec();
    let mut st = PeriodState {
        prices: h.prices_at(0),
        u: vec![0.0; k],
        dev: vec![0.0; k],
        gain: vec![false; k],
        dr: vec![0.0; k],
        cv: 0.0,
        eta: 0.0,
    };
    for t in 0..h.n_periods() {
        if t > 0 {
            let prev = h.prices_at(t - 1);
            for j in 0..k {
                st.dr[j] = r[j] - prev[j] + pi * st.dr[j];
                r[j] = pi * r[j] + (1.0 - pi) * prev[j];
            }
        }
        if t < first_scored {
            continue;
        }
        let p = h.prices_at(t);
        st.prices = p;
        for j in 0..k {
            st.dev[j] = r[j] - p[j];
            st.gain[j] = st.dev[j] - eps > 0.0;
            let coef = if st.gain[j] { seg.beta_gain } else { seg.beta_loss };
            st.u[j] = seg.intercept(j) + seg.beta_price * p[j] + coef * st.dev[j];
        }
        st.cv = lse(&st.u);
        st.eta = seg.alpha0 + seg.alpha1 * st.cv;
        visit(t, &st);
    }
}

/// Log-probability of one outcome (`None` = no purchase) and the number of
/// floored terms; adds the natural-scale gradient into `grad` when given.
fn outcome_terms(
    seg: &SegmentParameters,
    st: &PeriodState<'_>,
    outcome: Option<usize>,
    grad: Option<&mut [f64]>,
) -> (f64, usize) {
    let mut ll = 0.0;
    let mut floors = 0;
    // d ll / d eta, and whether the brand-choice term is live
    let mut d_eta = 0.0;
    let mut chosen = None;
    match outcome {
        Some(c) => {
            let lpb = log_logistic(st.eta);
            if lpb < LOG_PROB_FLOOR {
                ll += LOG_PROB_FLOOR;
                floors += 1;
            } else {
                ll += lpb;
                d_eta = logistic(-st.eta);
            }
            let lbr = st.u[c] - st.cv;
            if lbr < LOG_PROB_FLOOR {
                ll += LOG_PROB_FLOOR;
                floors += 1;
            } else {
                ll += lbr;
                chosen = Some(c);
            }
        }
        None => {
            let lnp = log_logistic(-st.eta);
            if lnp < LOG_PROB_FLOOR {
                ll += LOG_PROB_FLOOR;
                floors += 1;
            } else {
                ll += lnp;
                d_eta = -logistic(st.eta);
            }
        }
    }

    let Some(g) = grad else {
        return (ll, floors);
    };
    let k = st.u.len();
    g[slot::ALPHA0] += d_eta;
    g[slot::ALPHA1] += d_eta * st.cv;
    for j in 0..k {
        let q = (st.u[j] - st.cv).exp();
        let mut d = d_eta * seg.alpha1 * q;
        if let Some(c) = chosen {
            d += if j == c { 1.0 - q } else { -q };
        }
        if d == 0.0 {
            continue;
        }
        if st.gain[j] {
            g[slot::PI] += d * seg.beta_gain * st.dr[j];
            g[slot::gain(k)] += d * st.dev[j];
        } else {
            g[slot::PI] += d * seg.beta_loss * st.dr[j];
            g[slot::loss(k)] += d * st.dev[j];
        }
        if j + 1 < k {
            g[slot::INTERCEPT0 + j] += d;
        }
        g[slot::price(k)] += d * st.prices[j];
    }
    (ll, floors)
}

fn outcome_index(k: usize, outcome: Option<usize>) -> usize {
    outcome.unwrap_or(k)
}

/// Per-period log-probabilities of all `K + 1` outcomes under one segment.
struct OutcomeTable {
    n_outcomes: usize,
    width: usize,
    logp: Vec<f64>,
    floors: Vec<usize>,
    grad: Vec<f64>,
}

impl OutcomeTable {
    fn build(h: &Household, seg: &SegmentParameters, eps: Epsilon, first_scored: usize, want_grad: bool) -> Self {
        let k = h.n_brands();
        let n_outcomes = k + 1;
        let width = segment_width(k);
        let cells = h.n_periods() * n_outcomes;
        let mut table = Self {
            n_outcomes,
            width,
            logp: vec![0.0; cells],
            floors: vec![0; cells],
            grad: if want_grad { vec![0.0; cells * width] } else { Vec::new() },
        };
        walk_periods(h, seg, eps, first_scored, |t, st| {
            for o in 0..n_outcomes {
                let outcome = (o < k).then_some(o);
                let cell = t * n_outcomes + o;
                let g = want_grad.then(|| &mut table.grad[cell * width..(cell + 1) * width]);
                let (ll, f) = outcome_terms(seg, st, outcome, g);
                table.logp[cell] = ll;
                table.floors[cell] = f;
            }
        });
        table
    }

    fn score(&self, h: &Household, first_scored: usize) -> (f64, usize) {
        let k = self.n_outcomes - 1;
        let mut ll = 0.0;
        let mut floors = 0;
        for t in first_scored..h.n_periods() {
            let cell = t * self.n_outcomes + outcome_index(k, h.choice(t));
            ll += self.logp[cell];
            floors += self.floors[cell];
        }
        (ll, floors)
    }

    /// Adds `sum_i weights[i] * d l_i / d theta` over the member households.
    fn weighted_gradient(&self, members: &[&Household], weights: &[f64], out: &mut [f64]) {
        let k = self.n_outcomes - 1;
        let mut counts = vec![0.0; self.logp.len()];
        for (h, w) in members.iter().zip(weights) {
            for t in 0..h.n_periods() {
                counts[t * self.n_outcomes + outcome_index(k, h.choice(t))] += w;
            }
        }
        for (cell, c) in counts.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let g = &self.grad[cell * self.width..(cell + 1) * self.width];
            for (o, v) in out.iter_mut().zip(g) {
                *o += c * v;
            }
        }
    }
}

/// Log-likelihood of household `h` under `seg`, scoring 0-based periods
/// `first_scored..`. When `grad` is given, the natural-scale gradient is added
/// into it. Returns the log-likelihood and the number of floored terms.
pub(crate) fn segment_terms(
    h: &Household,
    seg: &SegmentParameters,
    eps: Epsilon,
    first_scored: usize,
    mut grad: Option<&mut [f64]>,
) -> (f64, usize) {
    let mut ll = 0.0;
    let mut floors = 0;
    walk_periods(h, seg, eps, first_scored, |t, st| {
        let (l, f) = outcome_terms(seg, st, h.choice(t), grad.as_deref_mut());
        ll += l;
        floors += f;
    });
    (ll, floors)
}
