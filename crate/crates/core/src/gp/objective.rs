use crate::data::{Dataset, Targets};
use crate::error::{contract, domain, Result};
use crate::nn::{validate_keep_probs, MaskSet, NetworkSpec, ParamSet, WeightDecay};
use crate::numerics::{logsumexp, sample_gaussian_matrix, Matrix, RngState};

/// Auxiliary noise for one reparametrised weight realisation:
/// `W_i = z_i (M_i + sigma eps_i) + (1 - z_i) sigma eps_i`, `b_i = m_i + sigma eps_b,i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamDraw {
    pub weight_noise: Vec<Matrix>,
    pub bias_noise: Vec<Vec<f64>>,
    pub masks: MaskSet,
    pub sigma: f64,
}

impl ReparamDraw {
    pub fn sample(
        spec: &NetworkSpec,
        keep_probs: &[f64],
        sigma: f64,
        rng: &mut RngState,
    ) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(domain(format!("negative variational std {sigma}")));
        }
        let masks = MaskSet::sample(spec, keep_probs, rng)?;
        let w = spec.widths();
        let weight_noise = (0..spec.num_weight_layers())
            .map(|i| sample_gaussian_matrix(w[i], w[i + 1], 0.0, 1.0, rng))
            .collect::<Result<_>>()?;
        let bias_noise = (0..spec.num_hidden_layers())
            .map(|i| sample_gaussian_matrix(1, w[i + 1], 0.0, 1.0, rng).map(Matrix::into_vec))
            .collect::<Result<_>>()?;
        Ok(Self {
            weight_noise,
            bias_noise,
            masks,
            sigma,
        })
    }

    /// The `sigma = 0` limit: only the masks carry randomness.
    pub fn collapsed(spec: &NetworkSpec, masks: MaskSet) -> Self {
        let w = spec.widths();
        Self {
            weight_noise: (0..spec.num_weight_layers())
                .map(|i| Matrix::zeros(w[i], w[i + 1]))
                .collect(),
            bias_noise: (0..spec.num_hidden_layers())
                .map(|i| vec![0.0; w[i + 1]])
                .collect(),
            masks,
            sigma: 0.0,
        }
    }
}

/// Realised weights and biases for one draw. With `sigma = 0` this is
/// exactly `(diag(z_i) M_i, m_i)`. The output bias, when present, is a mean
/// function and is passed through unchanged.
pub fn reparametrise(spec: &NetworkSpec, params: &ParamSet, draw: &ReparamDraw) -> Result<ParamSet> {
    params.validate(spec)?;
    draw.masks.validate(spec)?;
    let s = draw.sigma;
    let mut out = params.clone();
    for ((w, eps), z) in out
        .weights
        .iter_mut()
        .zip(&draw.weight_noise)
        .zip(&draw.masks.masks)
    {
        if eps.shape() != w.shape() {
            return Err(contract("weight noise shape does not match the weights"));
        }
        for (r, &zr) in z.iter().enumerate() {
            let noise = eps.row(r);
            for (v, &e) in w.row_mut(r).iter_mut().zip(noise) {
                *v = zr * (*v + s * e) + (1.0 - zr) * (s * e);
            }
        }
    }
    for (b, eps) in out.biases.iter_mut().zip(&draw.bias_noise) {
        if eps.len() != b.len() {
            return Err(contract("bias noise length does not match the biases"));
        }
        for (v, e) in b.iter_mut().zip(eps) {
            *v += s * e;
        }
    }
    Ok(out)
}

/// GP-side output for realised weights: `phi_i = s_i sigma(phi_{i-1} W_i + b_i)`
/// through the hidden layers, then `phi_L W_out`. No masks are applied here;
/// any dropout is already inside the realised weights. `s_i` is
/// `sqrt(1/K_i)` when the network spec scales features, else 1.
pub fn gp_output(spec: &NetworkSpec, realised: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
    realised.validate(spec)?;
    let last = spec.num_weight_layers() - 1;
    let mut phi = x.to_vec();
    for i in 0..last {
        let pre = realised.weights[i].vecmat(&phi)?;
        let s = spec.feature_scale(i);
        phi = pre
            .iter()
            .zip(&realised.biases[i])
            .map(|(p, b)| s * spec.nonlinearity.apply(p + b))
            .collect();
    }
    let mut y = realised.weights[last].vecmat(&phi)?;
    if let Some(b) = &realised.output_bias {
        for (v, b) in y.iter_mut().zip(b) {
            *v += b;
        }
    }
    Ok(y)
}

fn collapsed_outputs(
    spec: &NetworkSpec,
    params: &ParamSet,
    data: &Dataset,
    masks: &[MaskSet],
) -> Result<Matrix> {
    if masks.len() != data.len() {
        return Err(contract(format!(
            "{} mask sets for {} data points",
            masks.len(),
            data.len()
        )));
    }
    if data.is_empty() {
        return Err(contract("objective over an empty dataset"));
    }
    if data.targets.output_dim() != spec.output_dim() {
        return Err(contract("target width does not match the network output"));
    }
    let mut out = Matrix::zeros(data.len(), spec.output_dim());
    for (n, m) in masks.iter().enumerate() {
        let draw = ReparamDraw::collapsed(spec, m.clone());
        let realised = reparametrise(spec, params, &draw)?;
        let y = gp_output(spec, &realised, data.inputs.row(n))?;
        out.row_mut(n).copy_from_slice(&y);
    }
    Ok(out)
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Scaled single-sample GP-MC objective for regression (to be maximised):
///
/// `-(1/2N) sum_n ||y_n - yhat_n||^2 - sum_i p_i/(2 tau N) ||M_i||^2 - 1/(2 tau N) sum_i ||m_i||^2`
///
/// with `yhat_n` from the collapsed reparametrisation under `masks[n]`.
pub fn gp_mc_objective_regression(
    spec: &NetworkSpec,
    params: &ParamSet,
    keep_probs: &[f64],
    tau: f64,
    data: &Dataset,
    masks: &[MaskSet],
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(domain(format!("precision tau = {tau} must be positive")));
    }
    validate_keep_probs(spec, keep_probs)?;
    let Targets::Regression(y) = &data.targets else {
        return Err(contract("regression objective needs real-valued targets"));
    };
    let yhat = collapsed_outputs(spec, params, data, masks)?;
    let n = data.len() as f64;
    let fit: f64 = y
        .as_slice()
        .iter()
        .zip(yhat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / (2.0 * n);
    let mut prior = 0.0;
    for (p, w) in keep_probs.iter().zip(&params.weights) {
        prior += p / (2.0 * tau * n) * w.squared_norm();
    }
    for b in &params.biases {
        prior += 1.0 / (2.0 * tau * n) * sum_sq(b);
    }
    Ok(-fit - prior)
}

/// Scaled GP-MC objective for classification (to be maximised):
///
/// `(1/N) sum_n log p_hat(c_n) - sum_i p_i/(2N) ||M_i||^2 - 1/(2N) sum_i ||m_i||^2`.
pub fn gp_mc_objective_classification(
    spec: &NetworkSpec,
    params: &ParamSet,
    keep_probs: &[f64],
    data: &Dataset,
    masks: &[MaskSet],
) -> Result<f64> {
    validate_keep_probs(spec, keep_probs)?;
    let Targets::Classification { labels, .. } = &data.targets else {
        return Err(contract("classification objective needs class labels"));
    };
    let yhat = collapsed_outputs(spec, params, data, masks)?;
    let n = data.len() as f64;
    let mut fit = 0.0;
    for (row, &c) in yhat.row_iter().zip(labels) {
        if c == 0 || c > row.len() {
            return Err(contract(format!("label {c} outside 1..={}", row.len())));
        }
        fit += row[c - 1] - logsumexp(row)?;
    }
    fit /= n;
    let mut prior = 0.0;
    for (p, w) in keep_probs.iter().zip(&params.weights) {
        prior += p / (2.0 * n) * w.squared_norm();
    }
    for b in &params.biases {
        prior += 1.0 / (2.0 * n) * sum_sq(b);
    }
    Ok(fit - prior)
}

/// Weight decays under which the dropout cost equals the negated regression
/// objective: `lambda_i = p_i / (2 tau N)` on weights, `1 / (2 tau N)` on
/// hidden biases, none on an output bias.
pub fn gp_weight_decay_regression(
    spec: &NetworkSpec,
    keep_probs: &[f64],
    tau: f64,
    n: usize,
) -> Result<WeightDecay> {
    lengthscale_weight_decay(spec, keep_probs, tau, n, &LengthscalePrior::default())
}

/// Classification counterpart: `lambda_i = p_i / (2N)`, biases `1 / (2N)`.
pub fn gp_weight_decay_classification(
    spec: &NetworkSpec,
    keep_probs: &[f64],
    n: usize,
) -> Result<WeightDecay> {
    gp_weight_decay_regression(spec, keep_probs, 1.0, n)
}

/// Prior length-scales on the first-layer weights (`l`) and hidden biases
/// (`l'`). With `k_scaling` the later weight layers get the `N(0, 1/K)`
/// prior that matches a network without `sqrt(1/K)` feature scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthscalePrior {
    pub lengthscale: f64,
    pub bias_lengthscale: f64,
    pub k_scaling: bool,
}

impl Default for LengthscalePrior {
    fn default() -> Self {
        Self {
            lengthscale: 1.0,
            bias_lengthscale: 1.0,
            k_scaling: false,
        }
    }
}

/// Decays `l^2 p_1 / (2 tau N)` on `M_1`, `(K_in) p_i / (2 tau N)` or
/// `p_i / (2 tau N)` on later weights, `l'^2 / (2 tau N)` on hidden biases.
pub fn lengthscale_weight_decay(
    spec: &NetworkSpec,
    keep_probs: &[f64],
    tau: f64,
    n: usize,
    prior: &LengthscalePrior,
) -> Result<WeightDecay> {
    validate_keep_probs(spec, keep_probs)?;
    if !(tau > 0.0) {
        return Err(domain(format!("precision tau = {tau} must be positive")));
    }
    if !(prior.lengthscale > 0.0 && prior.bias_lengthscale > 0.0) {
        return Err(domain("length-scales must be positive"));
    }
    if n == 0 {
        return Err(contract("weight decay for an empty dataset"));
    }
    let n = n as f64;
    let l2 = prior.lengthscale * prior.lengthscale;
    let weights = keep_probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let factor = if i == 0 {
                l2
            } else if prior.k_scaling {
                spec.widths()[i] as f64
            } else {
                1.0
            };
            factor * p / (2.0 * tau * n)
        })
        .collect();
    let lb = prior.bias_lengthscale * prior.bias_lengthscale;
    Ok(WeightDecay {
        weights,
        biases: vec![lb / (2.0 * tau * n); spec.num_hidden_layers()],
        output_bias: 0.0,
    })
}

/// Regression objective under length-scale priors:
/// data term minus the [`lengthscale_weight_decay`] penalty.
pub fn lengthscale_objective_regression(
    spec: &NetworkSpec,
    params: &ParamSet,
    keep_probs: &[f64],
    tau: f64,
    prior: &LengthscalePrior,
    data: &Dataset,
    masks: &[MaskSet],
) -> Result<f64> {
    let decay = lengthscale_weight_decay(spec, keep_probs, tau, data.len(), prior)?;
    let Targets::Regression(y) = &data.targets else {
        return Err(contract("regression objective needs real-valued targets"));
    };
    let yhat = collapsed_outputs(spec, params, data, masks)?;
    let n = data.len() as f64;
    let fit: f64 = y
        .as_slice()
        .iter()
        .zip(yhat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / (2.0 * n);
    let mut prior_term = 0.0;
    for (l, w) in decay.weights.iter().zip(&params.weights) {
        prior_term += l * w.squared_norm();
    }
    for (l, b) in decay.biases.iter().zip(&params.biases) {
        prior_term += l * sum_sq(b);
    }
    Ok(-fit - prior_term)
}

fn check_conversion_args(lengthscale: f64, keep_prob: f64, n: usize) -> Result<()> {
    if !(lengthscale > 0.0) {
        return Err(domain(format!("length-scale {lengthscale} must be positive")));
    }
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(domain(format!("keep probability {keep_prob} outside (0, 1]")));
    }
    if n == 0 {
        return Err(domain("dataset size must be positive"));
    }
    Ok(())
}

/// `tau = l^2 p_1 / (2 N lambda_1)`.
pub fn tau_from_weight_decay(lengthscale: f64, keep_prob: f64, n: usize, weight_decay: f64) -> Result<f64> {
    check_conversion_args(lengthscale, keep_prob, n)?;
    if !(weight_decay > 0.0) {
        return Err(domain(format!(
            "weight decay {weight_decay} must be positive (zero means infinite precision)"
        )));
    }
    Ok(lengthscale * lengthscale * keep_prob / (2.0 * n as f64 * weight_decay))
}

/// `lambda_1 = l^2 p_1 / (2 N tau)`.
pub fn weight_decay_from_tau(lengthscale: f64, keep_prob: f64, n: usize, tau: f64) -> Result<f64> {
    check_conversion_args(lengthscale, keep_prob, n)?;
    if !(tau > 0.0) {
        return Err(domain(format!(
            "precision {tau} must be positive (zero means infinite weight decay)"
        )));
    }
    Ok(lengthscale * lengthscale * keep_prob / (2.0 * n as f64 * tau))
}

/// The combination `l^2 p_1 / (2N)` forced by a given `(lambda_1, tau)` pair.
pub fn prior_scale_from_pairing(weight_decay: f64, tau: f64) -> Result<f64> {
    if !(weight_decay > 0.0 && tau > 0.0) {
        return Err(domain("weight decay and precision must be positive"));
    }
    Ok(weight_decay * tau)
}
