//! Noise-adaptive low-rank matrix denoising.
//!
//! Observations `Y = X + W` with i.i.d. noise of unknown density are
//! denoised in two stages: an entrywise score denoiser fitted by kernel
//! density estimation on the entries themselves, followed by singular value
//! shrinkage calibrated by the estimated Fisher information of the noise.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the simulation harness and the
//! command-line tool use.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod kde;
pub mod linalg;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod shrinkage;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type Svd = linalg::Svd<f64>;
pub type NoiseModel = noise::NoiseModel<f64>;
pub type KdeSettings = kde::KdeSettings<f64>;
pub type AspectRatio = shrinkage::AspectRatio<f64>;
pub type DenoiserParams = estimator::DenoiserParams<f64>;
pub type DenoiseResult = estimator::DenoiseResult<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type NoiseModel32 = noise::NoiseModel<f32>;
pub type DenoiserParams32 = estimator::DenoiserParams<f32>;
pub type DenoiseResult32 = estimator::DenoiseResult<f32>;
