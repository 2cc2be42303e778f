use super::network::{forward_trace, MaskSet, NetworkSpec, ParamSet};
use crate::data::{Dataset, Targets};
use crate::error::{contract, domain, Result};
use crate::numerics::{logsumexp, Matrix, RngState};

/// Model hyperparameters: observation precision, weight decays, prior
/// length-scales and the variational standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub tau: f64,
    /// `(lambda_1, lambda_2, lambda_3)`: first-layer weights, later weights, biases.
    pub weight_decay: [f64; 3],
    pub lengthscale: f64,
    pub bias_lengthscale: f64,
    pub sigma: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            weight_decay: [0.0; 3],
            lengthscale: 1.0,
            bias_lengthscale: 1.0,
            sigma: 0.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(domain(format!("precision tau = {} must be positive", self.tau)));
        }
        if self.weight_decay.iter().any(|l| !(*l >= 0.0)) {
            return Err(domain("weight decays must be non-negative"));
        }
        if !(self.lengthscale > 0.0 && self.bias_lengthscale > 0.0) {
            return Err(domain("length-scales must be positive"));
        }
        if !(self.sigma >= 0.0) {
            return Err(domain("variational std must be non-negative"));
        }
        Ok(())
    }

    /// Per-layer decays for `spec`: `lambda_1` on the first weight matrix,
    /// `lambda_2` on every later one, `lambda_3` on every bias vector.
    pub fn decay_for(&self, spec: &NetworkSpec) -> WeightDecay {
        let [l1, l2, l3] = self.weight_decay;
        let mut weights = vec![l2; spec.num_weight_layers()];
        weights[0] = l1;
        WeightDecay {
            weights,
            biases: vec![l3; spec.num_hidden_layers()],
            output_bias: l3,
        }
    }
}

/// Squared-norm penalty coefficients, one per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDecay {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub output_bias: f64,
}

impl WeightDecay {
    pub fn zero(spec: &NetworkSpec) -> Self {
        Self::uniform(spec, 0.0, 0.0)
    }

    pub fn uniform(spec: &NetworkSpec, weights: f64, biases: f64) -> Self {
        Self {
            weights: vec![weights; spec.num_weight_layers()],
            biases: vec![biases; spec.num_hidden_layers()],
            output_bias: biases,
        }
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        if self.weights.len() != spec.num_weight_layers()
            || self.biases.len() != spec.num_hidden_layers()
        {
            return Err(contract("weight decay does not match the network layout"));
        }
        Ok(())
    }

    /// `sum_i lambda_i ||M_i||^2 + sum_i lambda_b,i ||m_i||^2`.
    pub fn penalty(&self, params: &ParamSet) -> f64 {
        let w: f64 = self
            .weights
            .iter()
            .zip(&params.weights)
            .map(|(l, m)| l * m.squared_norm())
            .sum();
        let b: f64 = self
            .biases
            .iter()
            .zip(&params.biases)
            .map(|(l, v)| l * sq(v))
            .sum();
        let o = params
            .output_bias
            .as_ref()
            .map_or(0.0, |v| self.output_bias * sq(v));
        w + b + o
    }
}

pub(crate) fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `E = (1 / 2N) sum_n ||y_n - yhat_n||^2`.
pub fn euclidean_loss(y: &Matrix, y_hat: &Matrix) -> Result<f64> {
    if y.shape() != y_hat.shape() {
        return Err(contract(format!(
            "targets {:?} vs predictions {:?}",
            y.shape(),
            y_hat.shape()
        )));
    }
    let n = y.rows();
    if n == 0 {
        return Err(contract("euclidean loss over zero rows"));
    }
    let total: f64 = y
        .as_slice()
        .iter()
        .zip(y_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(total / (2.0 * n as f64))
}

/// `E = -(1/N) sum_n log softmax(logits_n)[c_n]` with 1-based labels.
pub fn softmax_loss(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(contract(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(contract("softmax loss over zero rows"));
    }
    let mut total = 0.0;
    for (row, &c) in logits.row_iter().zip(labels) {
        total -= log_softmax_at(row, c)?;
    }
    Ok(total / labels.len() as f64)
}

/// `logits[c - 1] - logsumexp(logits)`.
pub(crate) fn log_softmax_at(logits: &[f64], label: usize) -> Result<f64> {
    if label == 0 || label > logits.len() {
        return Err(contract(format!(
            "label {label} outside 1..={}",
            logits.len()
        )));
    }
    Ok(logits[label - 1] - logsumexp(logits)?)
}

/// Network outputs for every row of `inputs`, row `n` under `masks[n]`.
pub fn predict_with_masks(
    spec: &NetworkSpec,
    params: &ParamSet,
    inputs: &Matrix,
    masks: &[MaskSet],
) -> Result<Matrix> {
    params.validate(spec)?;
    if masks.len() != inputs.rows() {
        return Err(contract(format!(
            "{} mask sets for {} data points",
            masks.len(),
            inputs.rows()
        )));
    }
    let mut out = Matrix::zeros(inputs.rows(), spec.output_dim());
    for (n, m) in masks.iter().enumerate() {
        m.validate(spec)?;
        let y = forward_trace(spec, params, m, inputs.row(n))?.output;
        out.row_mut(n).copy_from_slice(&y);
    }
    Ok(out)
}

/// Fresh Bernoulli masks, one set per data point.
pub fn sample_masks_per_point(
    spec: &NetworkSpec,
    keep_probs: &[f64],
    n: usize,
    rng: &mut RngState,
) -> Result<Vec<MaskSet>> {
    (0..n).map(|_| MaskSet::sample(spec, keep_probs, rng)).collect()
}

/// Data term `E` of the cost: square loss or softmax loss by target kind.
pub(crate) fn data_loss(targets: &Targets, outputs: &Matrix) -> Result<f64> {
    match targets {
        Targets::Regression(y) => euclidean_loss(y, outputs),
        Targets::Classification { labels, .. } => softmax_loss(outputs, labels),
    }
}

/// `L_dropout = E + weight-decay penalty`, with `masks[n]` applied to point `n`.
pub fn dropout_cost(
    spec: &NetworkSpec,
    params: &ParamSet,
    decay: &WeightDecay,
    data: &Dataset,
    masks: &[MaskSet],
) -> Result<f64> {
    decay.validate(spec)?;
    if data.targets.output_dim() != spec.output_dim() {
        return Err(contract("target width does not match the network output"));
    }
    let outputs = predict_with_masks(spec, params, &data.inputs, masks)?;
    Ok(data_loss(&data.targets, &outputs)? + decay.penalty(params))
}
