//! Probabilistic time-series forecasting with cumulative binary encoding.
//!
//! A real-valued series is mean-scaled, quantized onto a uniform grid, and
//! represented as monotone bit vectors (1...10...0). A fully convolutional
//! model predicts the next encoding with a per-bin binary cross-entropy, and
//! forecasting renormalizes the sigmoid outputs over the valid encodings to
//! get a proper distribution over bins, iterated autoregressively.
//!
//! The numeric core is generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`); `f32` is the training default, `f64` backs the
//! gradient checks.

pub mod cbe;
pub mod checkpoint;
pub mod data;
mod error;
pub mod forecasting;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use cbe::{BinDistribution, Binning, CbeVector, Scale};
pub use model::{param_count, BinConvConfig, BinConvModel, VariantKind};
pub use tensor::{Parameter, Tensor};
pub use training::{ScalingMode, TrainConfig, TrainHistory, TrainingPair};

/// Concrete aliases for the two supported precisions.
pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type BinConvModel32 = BinConvModel<f32>;
pub type BinConvModel64 = BinConvModel<f64>;
pub type Binning32 = Binning<f32>;
pub type Binning64 = Binning<f64>;
