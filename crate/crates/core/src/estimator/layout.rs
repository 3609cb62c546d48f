//! Mapping between [`MixtureParameters`] and the unconstrained vector the optimizer sees.
//!
//! Per segment: `[logit(pi), alpha0, alpha1, intercepts.., beta_gain,
//! beta_loss, beta_price]`, with the `logit(pi)` slot dropped when `pi` is
//! pinned. Then `S - 1` share logits; the last segment is the reference.

use crate::choicemodel::{logistic, MixtureParameters, SegmentParameters};
use crate::error::{Error, Result};
use crate::likelihood::{segment_width, slot};
use crate::reference::CarryoverWeight;

/// Smallest distance of a packed carry-over weight from 0 or 1.
pub const PI_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedVector(pub Vec<f64>);

impl UnconstrainedVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Result of [`ParamLayout::pack`].
#[derive(Debug, Clone, PartialEq)]
pub struct Packed {
    pub vector: UnconstrainedVector,
    /// Some carry-over weight was exactly 0 or 1 and was moved inside the interval.
    pub pi_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamLayout {
    n_segments: usize,
    n_brands: usize,
    pinned_pi: Option<CarryoverWeight>,
}

impl ParamLayout {
    pub fn new(n_segments: usize, n_brands: usize) -> Result<Self> {
        if n_segments == 0 {
            return Err(Error::invalid("need at least one segment"));
        }
        if n_brands < 2 {
            return Err(Error::invalid("need at least two brands"));
        }
        Ok(Self {
            n_segments,
            n_brands,
            pinned_pi: None,
        })
    }

    /// Same layout with every segment's carry-over weight fixed at `pi`.
    pub fn with_pinned_pi(mut self, pi: CarryoverWeight) -> Self {
        self.pinned_pi = Some(pi);
        self
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn n_brands(&self) -> usize {
        self.n_brands
    }

    pub fn pinned_pi(&self) -> Option<CarryoverWeight> {
        self.pinned_pi
    }

    fn seg_free(&self) -> usize {
        segment_width(self.n_brands) - usize::from(self.pinned_pi.is_some())
    }

    pub fn len(&self) -> usize {
        self.n_segments * self.seg_free() + self.n_segments - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Offset of the first share logit.
    fn share_offset(&self) -> usize {
        self.n_segments * self.seg_free()
    }

    pub fn pack(&self, mix: &MixtureParameters) -> Result<Packed> {
        if mix.n_segments() != self.n_segments || mix.n_brands() != self.n_brands {
            return Err(Error::invalid(format!(
                "parameters are {} segments x {} brands, layout expects {} x {}",
                mix.n_segments(),
                mix.n_brands(),
                self.n_segments,
                self.n_brands
            )));
        }
        let mut v = Vec::with_capacity(self.len());
        let mut clamped = false;
        for seg in mix.segments() {
            if self.pinned_pi.is_none() {
                let pi = seg.pi.value();
                let c = pi.clamp(PI_CLAMP, 1.0 - PI_CLAMP);
                clamped |= c != pi;
                v.push((c / (1.0 - c)).ln());
            }
            v.push(seg.alpha0);
            v.push(seg.alpha1);
            v.extend_from_slice(&seg.intercepts);
            v.push(seg.beta_gain);
            v.push(seg.beta_loss);
            v.push(seg.beta_price);
        }
        let psi = mix.psi();
        let last = psi[self.n_segments - 1].ln();
        v.extend(psi[..self.n_segments - 1].iter().map(|p| p.ln() - last));
        Ok(Packed {
            vector: UnconstrainedVector(v),
            pi_clamped: clamped,
        })
    }

    pub fn unpack(&self, v: &[f64]) -> Result<MixtureParameters> {
        if v.len() != self.len() {
            return Err(Error::invalid(format!(
                "vector has {} entries, layout expects {}",
                v.len(),
                self.len()
            )));
        }
        let k = self.n_brands;
        let w = self.seg_free();
        let segments = v[..self.share_offset()]
            .chunks_exact(w)
            .map(|c| {
                let (pi, rest) = match self.pinned_pi {
                    Some(pi) => (pi, c),
                    None => {
                        let p = logistic(c[0]).clamp(f64::EPSILON, 1.0 - f64::EPSILON);
                        (CarryoverWeight::new(p)?, &c[1..])
                    }
                };
                Ok(SegmentParameters {
                    pi,
                    alpha0: rest[0],
                    alpha1: rest[1],
                    intercepts: rest[2..k + 1].to_vec(),
                    beta_gain: rest[k + 1],
                    beta_loss: rest[k + 2],
                    beta_price: rest[k + 3],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let psi = shares_from_logits(&v[self.share_offset()..]);
        MixtureParameters::new(segments, psi)
    }

    /// Chain rule from the natural-scale gradient of the log-likelihood to the
    /// unconstrained vector.
    pub(crate) fn chain_gradient(
        &self,
        mix: &MixtureParameters,
        segment_grad: &[f64],
        posterior_sums: &[f64],
    ) -> Vec<f64> {
        let width = segment_width(self.n_brands);
        let mut out = Vec::with_capacity(self.len());
        for (s, seg) in mix.segments().iter().enumerate() {
            let g = &segment_grad[s * width..(s + 1) * width];
            if self.pinned_pi.is_none() {
                let pi = seg.pi.value();
                out.push(g[slot::PI] * pi * (1.0 - pi));
            }
            out.extend_from_slice(&g[1..]);
        }
        // d/d l_m of sum_s W_s log psi_s, psi = softmax(l, 0)
        let total: f64 = posterior_sums.iter().sum();
        let psi = mix.psi();
        for m in 0..self.n_segments - 1 {
            out.push(posterior_sums[m] - psi[m] * total);
        }
        out
    }
}

/// Softmax with an implicit zero logit for the last share.
pub(crate) fn shares_from_logits(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(0.0f64, f64::max);
    let mut e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    e.push((-m).exp());
    let z: f64 = e.iter().sum();
    let mut psi: Vec<f64> = e.iter().map(|x| (x / z).max(1e-300)).collect();
    let z: f64 = psi.iter().sum();
    psi.iter_mut().for_each(|p| *p /= z);
    psi
}
