//! Coarse-to-fine vehicle trajectory prediction: a wave-superposition
//! interaction encoder with a maneuver-conditioned Gaussian predictor,
//! followed by a few-step diffusion refiner.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod predictor;
pub mod scalar;
pub mod traj;
pub mod wave;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GraphF64 = autograd::Graph<f64>;
pub type GraphF32 = autograd::Graph<f32>;
pub type ParamSetF64 = nn::ParamSet<f64>;
pub type ParamSetF32 = nn::ParamSet<f32>;
pub type SceneInputF64 = model::SceneInput<f64>;
pub type SceneInputF32 = model::SceneInput<f32>;
pub type DistributionF64 = predictor::MultimodalDistribution<f64>;
pub type DistributionF32 = predictor::MultimodalDistribution<f32>;
pub type PipelineF64 = pipeline::Pipeline<f64>;
pub type PipelineF32 = pipeline::Pipeline<f32>;
pub type PredictionF64 = pipeline::Prediction<f64>;
pub type PredictionF32 = pipeline::Prediction<f32>;
