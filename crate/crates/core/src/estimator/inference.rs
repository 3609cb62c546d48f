//! Standard errors from the observed information and the significance convention.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::layout::ParamLayout;
use crate::choicemodel::MixtureParameters;
use crate::error::Result;
use crate::likelihood::Likelihood;

/// Per-parameter values laid out like one segment's coefficients plus its share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentTable<T> {
    pub pi: T,
    pub alpha0: T,
    pub alpha1: T,
    pub intercepts: Vec<T>,
    pub beta_gain: T,
    pub beta_loss: T,
    pub beta_price: T,
    pub psi: T,
}

impl<T> SegmentTable<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> SegmentTable<U> {
        SegmentTable {
            pi: f(&self.pi),
            alpha0: f(&self.alpha0),
            alpha1: f(&self.alpha1),
            intercepts: self.intercepts.iter().map(&mut f).collect(),
            beta_gain: f(&self.beta_gain),
            beta_loss: f(&self.beta_loss),
            beta_price: f(&self.beta_price),
            psi: f(&self.psi),
        }
    }

    pub fn zip<U, V>(&self, other: &SegmentTable<U>, mut f: impl FnMut(&T, &U) -> V) -> SegmentTable<V> {
        SegmentTable {
            pi: f(&self.pi, &other.pi),
            alpha0: f(&self.alpha0, &other.alpha0),
            alpha1: f(&self.alpha1, &other.alpha1),
            intercepts: self
                .intercepts
                .iter()
                .zip(&other.intercepts)
                .map(|(a, b)| f(a, b))
                .collect(),
            beta_gain: f(&self.beta_gain, &other.beta_gain),
            beta_loss: f(&self.beta_loss, &other.beta_loss),
            beta_price: f(&self.beta_price, &other.beta_price),
            psi: f(&self.psi, &other.psi),
        }
    }

    /// `(name, value)` pairs in display order.
    pub fn entries(&self) -> Vec<(String, &T)> {
        let mut out = vec![
            ("pi".to_string(), &self.pi),
            ("alpha0".to_string(), &self.alpha0),
            ("alpha1".to_string(), &self.alpha1),
        ];
        for (j, b) in self.intercepts.iter().enumerate() {
            out.push((format!("brand{}", j + 1), b));
        }
        out.push(("gain".to_string(), &self.beta_gain));
        out.push(("loss".to_string(), &self.beta_loss));
        out.push(("price".to_string(), &self.beta_price));
        out.push(("psi".to_string(), &self.psi));
        out
    }
}

/// Point estimates of segment `s` as a table.
pub fn estimates_table(mix: &MixtureParameters, s: usize) -> SegmentTable<f64> {
    let seg = &mix.segments()[s];
    SegmentTable {
        pi: seg.pi.value(),
        alpha0: seg.alpha0,
        alpha1: seg.alpha1,
        intercepts: seg.intercepts.clone(),
        beta_gain: seg.beta_gain,
        beta_loss: seg.beta_loss,
        beta_price: seg.beta_price,
        psi: mix.psi()[s],
    }
}

/// Two-sided normal p-value of `z`.
pub fn two_sided_p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Whether `estimate` differs from zero at level `threshold`; `None` without an SE.
pub fn significance_flag(estimate: f64, se: Option<f64>, threshold: f64) -> Option<bool> {
    let se = se?;
    if estimate == 0.0 {
        return Some(false);
    }
    Some(two_sided_p_value(estimate / se) < threshold)
}

pub fn significance_flags(
    mix: &MixtureParameters,
    ses: &[SegmentTable<Option<f64>>],
    threshold: f64,
) -> Vec<SegmentTable<Option<bool>>> {
    ses.iter()
        .enumerate()
        .map(|(s, se)| estimates_table(mix, s).zip(se, |e, v| significance_flag(*e, *v, threshold)))
        .collect()
}

/// Relative step for the finite-difference Hessian.
const HESSIAN_STEP: f64 = 1e-4;

/// Log-likelihood value and gradient in the unconstrained space.
pub fn unconstrained_gradient(
    lik: &Likelihood<'_>,
    layout: &ParamLayout,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let mix = layout.unpack(x)?;
    let e = lik.evaluate(&mix, true);
    let g = layout.chain_gradient(
        &mix,
        e.segment_grad.as_deref().unwrap_or_default(),
        e.posterior_sums.as_deref().unwrap_or_default(),
    );
    Ok((e.loglik, g))
}

/// Hessian of the log-likelihood in the unconstrained space by central
/// differences of the analytic gradient, symmetrized.
pub(crate) fn numerical_hessian(
    lik: &Likelihood<'_>,
    layout: &ParamLayout,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = HESSIAN_STEP * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let (_, gp) = unconstrained_gradient(lik, layout, &xp)?;
        xp[j] = x[j] - step;
        let (_, gm) = unconstrained_gradient(lik, layout, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Standard errors on the natural scale, `None` where unavailable.
///
/// Carry-over weights and shares are mapped from the unconstrained
/// covariance by the delta method. A pinned carry-over weight, the share of
/// a single-segment model, and every entry of a non-positive-definite
/// information matrix are reported as unavailable.
pub(crate) fn standard_errors_at(
    lik: &Likelihood<'_>,
    layout: &ParamLayout,
    mix: &MixtureParameters,
) -> Result<Vec<SegmentTable<Option<f64>>>> {
    let x = layout.pack(mix)?.vector.0;
    let hess = numerical_hessian(lik, layout, &x)?;
    let info = -hess;
    let unavailable = || {
        (0..layout.n_segments())
            .map(|s| estimates_table(mix, s).map(|_| None))
            .collect()
    };
    let Some(chol) = info.clone().cholesky() else {
        return Ok(unavailable());
    };
    let cov = chol.inverse();
    let sd = |i: usize| {
        let v = cov[(i, i)];
        (v.is_finite() && v > 0.0).then(|| v.sqrt())
    };

    let k = layout.n_brands();
    let n_seg = layout.n_segments();
    let pinned = layout.pinned_pi().is_some();
    let free = crate::likelihood::segment_width(k) - usize::from(pinned);
    let share0 = n_seg * free;

    // shares: psi = softmax(l, 0); d psi_s / d l_m = psi_s (delta_sm - psi_m)
    let psi = mix.psi();
    let psi_se: Vec<Option<f64>> = if n_seg == 1 {
        vec![None]
    } else {
        let jac = DMatrix::from_fn(n_seg, n_seg - 1, |s, m| {
            psi[s] * (if s == m { 1.0 } else { 0.0 } - psi[m])
        });
        let sub = cov.view((share0, share0), (n_seg - 1, n_seg - 1));
        let c = &jac * sub * jac.transpose();
        (0..n_seg)
            .map(|s| {
                let v = c[(s, s)];
                (v.is_finite() && v > 0.0).then(|| v.sqrt())
            })
            .collect()
    };

    let tables = mix
        .segments()
        .iter()
        .enumerate()
        .map(|(s, seg)| {
            let base = s * free;
            let (pi_se, off) = if pinned {
                (None, base)
            } else {
                let p = seg.pi.value();
                (sd(base).map(|v| v * p * (1.0 - p)), base + 1)
            };
            SegmentTable {
                pi: pi_se,
                alpha0: sd(off),
                alpha1: sd(off + 1),
                intercepts: (0..k - 1).map(|j| sd(off + 2 + j)).collect(),
                beta_gain: sd(off + k + 1),
                beta_loss: sd(off + k + 2),
                beta_price: sd(off + k + 3),
                psi: psi_se[s],
            }
        })
        .collect();
    Ok(tables)
}
