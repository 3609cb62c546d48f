//! Estimation of memory-based reference-price choice models.
//!
//! Reference prices are exponentially smoothed past prices with a carry-over
//! weight `pi`. Because the smoothed value has a direct expansion over the
//! price history, `pi` can be estimated by maximum likelihood jointly with the
//! choice-model coefficients of every latent segment, instead of being fixed
//! beforehand by a grid search.

pub mod choicemodel;
pub mod cli;
pub mod compare;
pub mod datagen;
pub mod presets;
pub mod error;
pub mod estimator;
pub mod likelihood;
pub mod panel;
pub mod panelio;
pub mod reference;
pub mod twostep;

pub use choicemodel::{Epsilon, MixtureParameters, SegmentParameters};
pub use error::{Error, Result};
pub use estimator::{fit, EstimatorOptions, FitResult};
pub use panel::{ChoicePanel, Household};
pub use reference::{CarryoverWeight, PriceSeries};
