//! The Gaussian-process reading of a dropout network.
//!
//! A covariance built from `K` random features `sigma(w_k^T x + b_k)` has
//! finite rank and factorises as `Phi Phi^T`. Introducing the output weights
//! as auxiliary variables and putting two-component mixtures on the rows of
//! each weight matrix, with the component variance collapsed to zero, turns
//! a single-sample Monte Carlo estimate of the evidence lower bound into the
//! negated dropout cost. The functions here compute that GP side directly so
//! it can be checked against [`crate::nn::dropout_cost`].

mod deep;
mod features;
mod objective;

pub use deep::{
    deep_two_layer_sample, propagate_first_layer, second_layer_features, DeepGpConfig,
    DeepGpSample,
};
pub use features::{
    feature_map, feature_matrix, finite_rank_covariance, sample_covariance_parameters,
    CovarianceMatrix,
};
pub use objective::{
    gp_mc_objective_classification, gp_mc_objective_regression, gp_output,
    gp_weight_decay_classification, gp_weight_decay_regression, lengthscale_objective_regression,
    lengthscale_weight_decay, prior_scale_from_pairing, reparametrise, tau_from_weight_decay,
    weight_decay_from_tau, LengthscalePrior, ReparamDraw,
};
