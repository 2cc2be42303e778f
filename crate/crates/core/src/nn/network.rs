use std::fmt;
use std::str::FromStr;

use crate::error::{contract, domain, Error, Result};
use crate::numerics::{sample_bernoulli_vector, Matrix, RngState};

/// Element-wise nonlinearity applied after each hidden affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Relu,
    Tanh,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Relu => x.max(0.0),
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Identity => x,
        }
    }

    /// Derivative at the pre-activation `x`. `relu'(0)` is taken as 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Nonlinearity::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Relu => "relu",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Identity => "identity",
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Nonlinearity::Relu),
            "tanh" => Ok(Nonlinearity::Tanh),
            "identity" => Ok(Nonlinearity::Identity),
            other => Err(domain(format!("unknown nonlinearity `{other}`"))),
        }
    }
}

/// Layer layout of a fully connected dropout network.
///
/// `widths = [Q, K_1, ..., K_L, D]`: weight layer `i` maps `widths[i]` to
/// `widths[i + 1]` and a dropout mask of length `widths[i]` sits in front of
/// every weight layer, the input layer included.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    widths: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    /// Multiply hidden outputs by `sqrt(1 / K_i)`, the GP feature-map scaling.
    pub scale_features: bool,
    /// Give the output layer a bias (a GP mean function). Off by default.
    pub output_bias: bool,
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>, nonlinearity: Nonlinearity) -> Result<Self> {
        if widths.len() < 3 {
            return Err(contract(format!(
                "need input, at least one hidden and an output width, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(contract(format!("zero width in {widths:?}")));
        }
        Ok(Self {
            widths,
            nonlinearity,
            scale_features: false,
            output_bias: false,
        })
    }

    pub fn with_scaled_features(mut self, on: bool) -> Self {
        self.scale_features = on;
        self
    }

    pub fn with_output_bias(mut self, on: bool) -> Self {
        self.output_bias = on;
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_weight_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    /// Factor applied to the output of hidden layer `i` (0-based weight layer).
    pub fn feature_scale(&self, i: usize) -> f64 {
        if self.scale_features {
            (1.0 / self.widths[i + 1] as f64).sqrt()
        } else {
            1.0
        }
    }

    /// Total number of Bernoulli mask entries per forward pass.
    pub fn mask_bits(&self) -> usize {
        self.widths[..self.widths.len() - 1].iter().sum()
    }
}

/// Trainable parameters: weight means `M_i` and biases `m_i`.
///
/// `biases[i]` belongs to hidden layer `i`; the output bias is separate and
/// only present when the network spec asks for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub output_bias: Option<Vec<f64>>,
}

impl ParamSet {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let w = spec.widths();
        Self {
            weights: (0..spec.num_weight_layers())
                .map(|i| Matrix::zeros(w[i], w[i + 1]))
                .collect(),
            biases: (0..spec.num_hidden_layers())
                .map(|i| vec![0.0; w[i + 1]])
                .collect(),
            output_bias: spec.output_bias.then(|| vec![0.0; spec.output_dim()]),
        }
    }

    /// Biases at zero, weights uniform on `[-sqrt(3 / fan_in), sqrt(3 / fan_in)]`.
    pub fn init_uniform(spec: &NetworkSpec, rng: &mut RngState) -> Self {
        let mut p = Self::zeros(spec);
        for w in &mut p.weights {
            let bound = (3.0 / w.rows() as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = rng.uniform_range(-bound, bound);
            }
        }
        p
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let w = spec.widths();
        if self.weights.len() != spec.num_weight_layers() {
            return Err(contract(format!(
                "{} weight matrices for {} layers",
                self.weights.len(),
                spec.num_weight_layers()
            )));
        }
        for (i, m) in self.weights.iter().enumerate() {
            if m.shape() != (w[i], w[i + 1]) {
                return Err(contract(format!(
                    "weight {i} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    w[i],
                    w[i + 1]
                )));
            }
        }
        if self.biases.len() != spec.num_hidden_layers() {
            return Err(contract("wrong number of bias vectors"));
        }
        for (i, b) in self.biases.iter().enumerate() {
            if b.len() != w[i + 1] {
                return Err(contract(format!("bias {i} has length {}", b.len())));
            }
        }
        match (&self.output_bias, spec.output_bias) {
            (Some(b), true) if b.len() == spec.output_dim() => {}
            (None, false) => {}
            _ => return Err(contract("output bias does not match the network spec")),
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
            + self.output_bias.as_ref().map_or(0, Vec::len)
    }

    /// All entries in a fixed order: weights, hidden biases, output bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for w in &self.weights {
            out.extend_from_slice(w.as_slice());
        }
        for b in &self.biases {
            out.extend_from_slice(b);
        }
        if let Some(b) = &self.output_bias {
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`ParamSet::to_flat`] using `self` as the shape template.
    pub fn with_flat(&self, flat: &[f64]) -> Result<ParamSet> {
        if flat.len() != self.num_params() {
            return Err(contract(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut out = self.clone();
        let mut it = flat.iter().copied();
        for w in &mut out.weights {
            for v in w.as_mut_slice() {
                *v = it.next().unwrap();
            }
        }
        for b in out.biases.iter_mut().chain(out.output_bias.as_mut()) {
            for v in b.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        Ok(out)
    }

    /// `self += alpha * other`, shapes assumed equal.
    pub fn axpy(&mut self, alpha: f64, other: &ParamSet) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.axpy(alpha, b).expect("matching shapes");
        }
        for (a, b) in self
            .biases
            .iter_mut()
            .chain(self.output_bias.as_mut())
            .zip(other.biases.iter().chain(other.output_bias.as_ref()))
        {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    /// Multiplies weight matrix `i` by `factors[i]`; biases are untouched.
    pub fn scale_weights(&self, factors: &[f64]) -> ParamSet {
        let mut out = self.clone();
        for (w, &f) in out.weights.iter_mut().zip(factors) {
            *w = w.scale(f);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// One dropout realisation: a mask vector in front of every weight layer.
///
/// Bernoulli masks hold 0.0 / 1.0; the multiplicative Gaussian variant stores
/// real-valued entries in the same slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub masks: Vec<Vec<f64>>,
    pub keep_probs: Vec<f64>,
}

impl MaskSet {
    /// All units kept: the deterministic network.
    pub fn ones(spec: &NetworkSpec) -> Self {
        let w = spec.widths();
        Self {
            masks: (0..spec.num_weight_layers()).map(|i| vec![1.0; w[i]]).collect(),
            keep_probs: vec![1.0; spec.num_weight_layers()],
        }
    }

    pub fn sample(spec: &NetworkSpec, keep_probs: &[f64], rng: &mut RngState) -> Result<Self> {
        validate_keep_probs(spec, keep_probs)?;
        let w = spec.widths();
        let masks = keep_probs
            .iter()
            .enumerate()
            .map(|(i, &p)| sample_bernoulli_vector(p, w[i], rng))
            .collect::<Result<_>>()?;
        Ok(Self {
            masks,
            keep_probs: keep_probs.to_vec(),
        })
    }

    /// Multiplicative `N(1, sigma^2)` noise in place of Bernoulli masks.
    pub fn sample_gaussian(spec: &NetworkSpec, sigma: f64, rng: &mut RngState) -> Result<Self> {
        let w = spec.widths();
        let masks = (0..spec.num_weight_layers())
            .map(|i| sample_multiplicative_gaussian_mask(w[i], sigma, rng))
            .collect::<Result<_>>()?;
        Ok(Self {
            masks,
            keep_probs: vec![1.0; spec.num_weight_layers()],
        })
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        if self.masks.len() != spec.num_weight_layers() {
            return Err(contract(format!(
                "{} masks for {} weight layers",
                self.masks.len(),
                spec.num_weight_layers()
            )));
        }
        for (i, (m, &w)) in self.masks.iter().zip(spec.widths()).enumerate() {
            if m.len() != w {
                return Err(contract(format!("mask {i} has length {}, expected {w}", m.len())));
            }
        }
        Ok(())
    }
}

pub fn validate_keep_probs(spec: &NetworkSpec, keep_probs: &[f64]) -> Result<()> {
    if keep_probs.len() != spec.num_weight_layers() {
        return Err(contract(format!(
            "{} keep probabilities for {} weight layers",
            keep_probs.len(),
            spec.num_weight_layers()
        )));
    }
    if let Some(p) = keep_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(domain(format!("keep probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// `dim` draws from `N(1, sigma^2)`.
pub fn sample_multiplicative_gaussian_mask(
    dim: usize,
    sigma: f64,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(domain(format!("negative noise scale {sigma}")));
    }
    Ok((0..dim).map(|_| 1.0 + sigma * rng.normal()).collect())
}

/// Per-layer quantities of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// Masked input of each weight layer, `a_i ∘ z_i`.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pub pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

pub(crate) fn forward_trace(
    spec: &NetworkSpec,
    params: &ParamSet,
    masks: &MaskSet,
    x: &[f64],
) -> Result<Trace> {
    if x.len() != spec.input_dim() {
        return Err(contract(format!(
            "input of length {} for a network with {} inputs",
            x.len(),
            spec.input_dim()
        )));
    }
    let last = spec.num_weight_layers() - 1;
    let mut inputs = Vec::with_capacity(last + 1);
    let mut pre = Vec::with_capacity(last);
    let mut act = x.to_vec();
    for (i, w) in params.weights.iter().enumerate() {
        let masked: Vec<f64> = act.iter().zip(&masks.masks[i]).map(|(a, z)| a * z).collect();
        let mut h = w.vecmat(&masked)?;
        if i < last {
            for (v, b) in h.iter_mut().zip(&params.biases[i]) {
                *v += b;
            }
            let s = spec.feature_scale(i);
            act = h.iter().map(|&v| s * spec.nonlinearity.apply(v)).collect();
            pre.push(h);
        } else {
            if let Some(b) = &params.output_bias {
                for (v, b) in h.iter_mut().zip(b) {
                    *v += b;
                }
            }
            act = h;
        }
        inputs.push(masked);
    }
    Ok(Trace {
        inputs,
        pre,
        output: act,
    })
}

/// Output of the network for input row `x` under one mask realisation.
///
/// Each layer multiplies its input element-wise by its mask, applies the
/// affine map, and (for hidden layers) the nonlinearity followed by the
/// optional `sqrt(1/K)` scaling. The output layer is linear.
pub fn forward(spec: &NetworkSpec, params: &ParamSet, masks: &MaskSet, x: &[f64]) -> Result<Vec<f64>> {
    params.validate(spec)?;
    masks.validate(spec)?;
    Ok(forward_trace(spec, params, masks, x)?.output)
}

/// Forward pass with every unit kept.
pub fn forward_unmasked(spec: &NetworkSpec, params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
    forward(spec, params, &MaskSet::ones(spec), x)
}

/// `diag(z_i) M_i` for every layer: dropout expressed as zeroed weight rows.
pub fn mask_weight_rows(params: &ParamSet, masks: &MaskSet) -> ParamSet {
    let mut out = params.clone();
    for (w, z) in out.weights.iter_mut().zip(&masks.masks) {
        for (r, &zr) in z.iter().enumerate() {
            for v in w.row_mut(r) {
                *v *= zr;
            }
        }
    }
    out
}
