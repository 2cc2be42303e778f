//! Dropout neural networks and their reading as an approximate deep Gaussian
//! process.
//!
//! The crate is split along the two sides of that correspondence:
//!
//! * [`nn`] is the plain dropout network: masked forward pass, square and
//!   softmax losses, the weight-decayed cost, exact gradients and a momentum
//!   SGD trainer.
//! * [`gp`] is the Gaussian-process side: the finite-rank covariance and its
//!   feature map, reparametrised weights, the Monte Carlo objectives whose
//!   negation equals the dropout cost, length-scale algebra and a two-layer
//!   deep GP sampler.
//! * [`kl`] holds the mixture-of-Gaussians KL approximation together with an
//!   analytic Gaussian KL and a Monte Carlo oracle.
//! * [`uncertainty`] turns a trained network into predictive moments with MC
//!   dropout, checks them against exhaustive mask enumeration, and computes
//!   predictive log-likelihoods and calibration percentiles.
//!
//! Everything random goes through [`numerics::RngState`], keyed by a seed and
//! a stream id, so every result is a pure function of its inputs.

pub mod checkpoint;
pub mod checks;
pub mod data;
pub mod error;
pub mod gp;
pub mod kl;
pub mod nn;
pub mod numerics;
pub mod uncertainty;

pub use error::{Error, Result};
pub use numerics::{logsumexp, Matrix, RngState};
