//! Sequential latent-attribute selection trained with a soft policy
//! gradient and a self-critical baseline, on a linear subspace generator
//! with a synthetic aesthetics scorer.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the command-line tool and
//! the gradient audits use.

pub mod agent;
pub mod diffcore;
pub mod env;
mod error;
pub mod gradcheck;
pub mod nn;
mod scalar;
pub mod seeding;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = diffcore::Tensor<f64>;
pub type Tape = diffcore::Tape<f64>;
pub type Environment = env::Environment<f64>;
pub type Episode = env::Episode<f64>;
pub type PolicyParams = agent::PolicyParams<f64>;
pub type Trajectory = agent::Trajectory<f64>;

pub type Tensor32 = diffcore::Tensor<f32>;
pub type Tape32 = diffcore::Tape<f32>;
pub type Environment32 = env::Environment<f32>;
pub type PolicyParams32 = agent::PolicyParams<f32>;
