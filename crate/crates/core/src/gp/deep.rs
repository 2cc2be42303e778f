use crate::error::{contract, domain, Result};
use crate::nn::Nonlinearity;
use crate::numerics::{sample_gaussian_matrix, Matrix, RngState};

use super::features::feature_matrix;

/// Shapes and priors for a two-layer deep GP built from finite-rank
/// covariances: the first GP's output `F1` (`N x K2`) is fed through the
/// covariance of the second.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepGpConfig {
    pub k1: usize,
    pub k2: usize,
    pub output_dim: usize,
    pub first: Nonlinearity,
    pub second: Nonlinearity,
    /// Observation precision; `Y = F2 + tau^{-1/2} noise`.
    pub tau: f64,
    /// Biases are drawn from `N(0, l'^-2)`.
    pub bias_lengthscale: f64,
}

impl DeepGpConfig {
    pub fn new(k1: usize, k2: usize, output_dim: usize, nonlinearity: Nonlinearity) -> Self {
        Self {
            k1,
            k2,
            output_dim,
            first: nonlinearity,
            second: nonlinearity,
            tau: 1.0,
            bias_lengthscale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 || self.output_dim == 0 {
            return Err(contract("deep GP widths must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(domain(format!("precision tau = {} must be positive", self.tau)));
        }
        if !(self.bias_lengthscale > 0.0) {
            return Err(domain("bias length-scale must be positive"));
        }
        Ok(())
    }
}

/// One joint draw of all weights and function values.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepGpSample {
    /// `Q x K1`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `K1 x K2`
    pub w2: Matrix,
    /// Bias of the second covariance, one entry per `F1` column (`K2`).
    pub b2: Vec<f64>,
    /// `K2 x D`
    pub w3: Matrix,
    /// `N x K1`
    pub phi1: Matrix,
    /// `N x K2`
    pub f1: Matrix,
    /// `N x K2`
    pub phi2: Matrix,
    /// `N x D`, noise free
    pub f2: Matrix,
    /// `N x D`, with observation noise
    pub y: Matrix,
}

/// `F1 = Phi1 W2`.
pub fn propagate_first_layer(phi1: &Matrix, w2: &Matrix) -> Result<Matrix> {
    phi1.matmul(w2)
}

/// `Phi2[n, k] = sqrt(1/K2) sigma(F1[n, k] + b2[k])`.
pub fn second_layer_features(f1: &Matrix, b2: &[f64], nonlinearity: Nonlinearity) -> Result<Matrix> {
    let k2 = f1.cols();
    if b2.len() != k2 {
        return Err(contract(format!("bias of length {} for {k2} columns", b2.len())));
    }
    let scale = (1.0 / k2 as f64).sqrt();
    let mut out = f1.clone();
    for n in 0..out.rows() {
        for (v, b) in out.row_mut(n).iter_mut().zip(b2) {
            *v = scale * nonlinearity.apply(*v + b);
        }
    }
    Ok(out)
}

/// Draws `W1, W2, W3 ~ N(0, 1)` entrywise, biases from the configured
/// prior, and propagates `x` through both layers.
pub fn deep_two_layer_sample(config: &DeepGpConfig, x: &Matrix, rng: &mut RngState) -> Result<DeepGpSample> {
    config.validate()?;
    if x.rows() == 0 || x.cols() == 0 {
        return Err(contract("deep GP sample needs a non-empty input matrix"));
    }
    let bias_std = 1.0 / config.bias_lengthscale;
    let w1 = sample_gaussian_matrix(x.cols(), config.k1, 0.0, 1.0, rng)?;
    let b1 = sample_gaussian_matrix(1, config.k1, 0.0, bias_std, rng)?.into_vec();
    let w2 = sample_gaussian_matrix(config.k1, config.k2, 0.0, 1.0, rng)?;
    let b2 = sample_gaussian_matrix(1, config.k2, 0.0, bias_std, rng)?.into_vec();
    let w3 = sample_gaussian_matrix(config.k2, config.output_dim, 0.0, 1.0, rng)?;

    let phi1 = feature_matrix(x, &w1, &b1, config.first)?;
    let f1 = propagate_first_layer(&phi1, &w2)?;
    let phi2 = second_layer_features(&f1, &b2, config.second)?;
    let f2 = phi2.matmul(&w3)?;
    let noise = sample_gaussian_matrix(f2.rows(), f2.cols(), 0.0, config.tau.powf(-0.5), rng)?;
    let y = f2.add(&noise)?;
    Ok(DeepGpSample {
        w1,
        b1,
        w2,
        b2,
        w3,
        phi1,
        f1,
        phi2,
        f2,
        y,
    })
}
