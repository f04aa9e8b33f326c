//! FedAvg under partial client participation for over-parameterized deep
//! linear and two-layer ReLU networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`models`]: the two networks, square loss and closed-form gradients;
//! * [`federation`]: participant sampling, local gradient descent, server
//!   averaging and per-round traces;
//! * [`data`]: IDX ingestion, synthetic teacher data, unit-norm
//!   preprocessing and the label-skew partitioner;
//! * [`analysis`]: Gram matrices, spectra, per-round contraction bounds,
//!   the first-order residual predictor and runtime checks of the
//!   convergence inequalities.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which the diagnostic tolerances assume.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod federation;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod scalar;

pub use error::{DivergenceSite, Error, Result};
pub use scalar::Scalar;

/// Dense `f64` matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense `f64` column vector.
pub type Vector = nalgebra::DVector<f64>;

pub type DeepLinear = models::DeepLinearParams<f64>;
pub type TwoLayer = models::TwoLayerParams<f64>;
pub type Batch = models::LabeledBatch<f64>;
pub type Dataset = data::Dataset<f64>;
pub type FederationConfig = federation::FederationConfig<f64>;
pub type RoundTrace = federation::RoundTrace<f64>;
pub type GramSpectrum = analysis::GramSpectrum<f64>;
pub type BoundSeries = analysis::BoundSeries<f64>;
