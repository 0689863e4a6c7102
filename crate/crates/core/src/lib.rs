//! Globally stable stochastic dynamical systems learned from demonstrations.
//!
//! Observations `y` are tied to a latent stable SDE through a learned
//! diffeomorphism `y = h(z)`. The latent system is either a Hurwitz linear SDE
//! (point-to-point motions) or a polar limit cycle (rhythmic motions), so
//! stability carries over to the observed dynamics by construction.
//!
//! The core is generic over [`Scalar`], which lets the same code run on `f64`
//! and on reverse-mode tape variables. The aliases below fix the scalar to
//! `f64` for ordinary use.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diffcore;
pub mod error;
pub mod flows;
pub mod latent;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Flow = flows::FlowStack<f64>;
pub type LinearLatent = latent::LinearSDE<f64>;
pub type CycleLatent = latent::LimitCycleSDE<f64>;
pub type LatentDynamics = latent::Latent<f64>;
pub type Model = model::ImitationModel<f64>;
