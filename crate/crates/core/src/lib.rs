//! Fine-tuning instability mitigation laboratory.
//!
//! The crate trains small classifiers on top of a frozen "pretrained"
//! backbone and implements a family of strategies that reduce the spread of
//! results across random seeds: delayed ensembles created by perturbing a
//! single trained model, repeated noisy interpolation during training, their
//! combination, and the usual baselines (plain ensembles, noise injection,
//! stochastic weight averaging, mixout, augmentation, longer training with
//! warmup).
//!
//! Module map:
//!
//! * [`param`] – tensors, parameter groups, deterministic RNG streams, and the
//!   binary parameter container.
//! * [`model`] – MLP classifier with full, head-only and low-rank adapter
//!   tuning, dropout and mixout, manual backpropagation.
//! * [`optim`] – Adam / AdamW and learning-rate schedules.
//! * [`noise`] – Gaussian perturbation of parameters and inputs.
//! * [`ensemble`] – uniform weight interpolation and hard voting.
//! * [`data`] – dataset IO, feature hashing, splits, shot sampling,
//!   synthetic data and augmentation expansion.
//! * [`mitigation`] – phase plans and the strategy engine.
//! * [`metrics`] – macro-F1, summaries, cost model and significance tests.
//! * [`harness`] – seed sweeps, shot sweeps, sensitivity grids and reports.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mitigation;
pub mod model;
pub mod noise;
pub mod optim;
pub mod param;

pub use error::{Error, Result};
pub use param::{derive_stream, Origin, ParamGroup, ParamSet, RngStream, Tensor};
