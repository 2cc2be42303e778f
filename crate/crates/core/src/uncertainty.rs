//! Monte Carlo dropout prediction.
//!
//! Keeping dropout on at test time and averaging `T` stochastic forward
//! passes estimates the predictive mean; the spread of the passes plus the
//! observation noise `tau^-1 I` estimates the predictive covariance.

use rayon::prelude::*;

use crate::error::{contract, domain, Result};
use crate::nn::{forward, forward_unmasked, validate_keep_probs, MaskSet, NetworkSpec, ParamSet};
use crate::numerics::{log_mean_exp, logsumexp, Matrix, RngState};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Largest mask space [`enumerate_masks_oracle`] will walk.
pub const MAX_ENUMERATION_BITS: usize = 24;

/// How masks are drawn for each stochastic pass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MaskNoise {
    /// Bernoulli(`p_i`) masks.
    #[default]
    Bernoulli,
    /// Multiplicative `N(1, sigma^2)` noise on every unit.
    Gaussian(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub keep_probs: Vec<f64>,
    pub tau: f64,
    pub noise: MaskNoise,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64, keep_probs: Vec<f64>, tau: f64) -> Self {
        Self {
            samples,
            seed,
            keep_probs,
            tau,
            noise: MaskNoise::Bernoulli,
        }
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        if self.samples == 0 {
            return Err(contract("Monte Carlo prediction needs at least one sample"));
        }
        check_tau(self.tau)?;
        validate_keep_probs(spec, &self.keep_probs)
    }

    /// Masks for sample `t` of input `point`, from their own stream.
    pub fn masks(&self, spec: &NetworkSpec, point: u64, t: u64) -> Result<MaskSet> {
        let mut rng = RngState::new(self.seed, (point << 32) | t);
        match self.noise {
            MaskNoise::Bernoulli => MaskSet::sample(spec, &self.keep_probs, &mut rng),
            MaskNoise::Gaussian(sigma) => MaskSet::sample_gaussian(spec, sigma, &mut rng),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain(format!("precision tau = {tau} must be positive")));
    }
    Ok(())
}

/// Predictive moments at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSummary {
    pub mean: Vec<f64>,
    /// `tau^-1 I + E[y^T y]`
    pub second_moment: Matrix,
    /// `second_moment - mean^T mean`
    pub covariance: Matrix,
    /// The `T x D` stochastic outputs, when kept.
    pub samples: Option<Matrix>,
    pub std_devs: Vec<f64>,
}

impl PredictiveSummary {
    /// Builds the summary from weighted outputs (weights sum to one), adding
    /// `noise` to the covariance diagonal.
    fn from_weighted(outputs: &[(f64, Vec<f64>)], noise: f64) -> Self {
        let d = outputs[0].1.len();
        // Centre on the first output so identical outputs give an exactly
        // zero spread.
        let origin = outputs[0].1.clone();
        let mut shift = vec![0.0; d];
        for (w, y) in outputs {
            for (s, (a, o)) in shift.iter_mut().zip(y.iter().zip(&origin)) {
                *s += w * (a - o);
            }
        }
        let mean: Vec<f64> = origin.iter().zip(&shift).map(|(o, s)| o + s).collect();
        let mut spread = Matrix::zeros(d, d);
        for (w, y) in outputs {
            let c: Vec<f64> = y.iter().zip(&mean).map(|(a, m)| a - m).collect();
            for i in 0..d {
                for j in 0..=i {
                    spread.as_mut_slice()[i * d + j] += w * c[i] * c[j];
                }
            }
        }
        let mut covariance = spread;
        for i in 0..d {
            covariance.as_mut_slice()[i * d + i] += noise;
            for j in 0..i {
                covariance.as_mut_slice()[j * d + i] = covariance[(i, j)];
            }
        }
        let mut second_moment = covariance.clone();
        for i in 0..d {
            for j in 0..d {
                second_moment.as_mut_slice()[i * d + j] += mean[i] * mean[j];
            }
        }
        let std_devs = (0..d).map(|i| covariance[(i, i)].sqrt()).collect();
        Self {
            mean,
            second_moment,
            covariance,
            samples: None,
            std_devs,
        }
    }

    /// Equal-weight summary of a `T x D` sample matrix.
    pub fn from_samples(samples: Matrix, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if samples.rows() == 0 || samples.cols() == 0 {
            return Err(contract("summary of an empty sample matrix"));
        }
        let w = 1.0 / samples.rows() as f64;
        let outputs: Vec<(f64, Vec<f64>)> = samples.row_iter().map(|r| (w, r.to_vec())).collect();
        let mut s = Self::from_weighted(&outputs, 1.0 / tau);
        s.samples = Some(samples);
        Ok(s)
    }

    /// Summary of class probabilities: each row of logits goes through a
    /// softmax, and no observation noise is added.
    pub fn from_logit_samples(logits: Matrix) -> Result<Self> {
        if logits.rows() == 0 || logits.cols() == 0 {
            return Err(contract("summary of an empty sample matrix"));
        }
        let w = 1.0 / logits.rows() as f64;
        let mut probs = Vec::with_capacity(logits.rows());
        for r in logits.row_iter() {
            let lse = logsumexp(r)?;
            probs.push(r.iter().map(|v| (v - lse).exp()).collect::<Vec<_>>());
        }
        let outputs: Vec<(f64, Vec<f64>)> = probs.iter().map(|p| (w, p.clone())).collect();
        let mut s = Self::from_weighted(&outputs, 0.0);
        s.samples = Some(Matrix::from_rows(&probs)?);
        Ok(s)
    }

    /// Scalar uncertainty: the mean of the per-output standard deviations.
    pub fn uncertainty(&self) -> f64 {
        self.std_devs.iter().sum::<f64>() / self.std_devs.len() as f64
    }
}

/// Standard errors of the Monte Carlo mean and covariance entries,
/// estimated from the samples themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentErrors {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

pub fn moment_std_errors(samples: &Matrix) -> Result<MomentErrors> {
    let t = samples.rows();
    if t < 2 {
        return Err(contract("standard errors need at least two samples"));
    }
    let d = samples.cols();
    let tf = t as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| samples.row_iter().map(|r| r[j]).sum::<f64>() / tf)
        .collect();
    let centred: Vec<Vec<f64>> = samples
        .row_iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let se = |f: &dyn Fn(&[f64]) -> f64| {
        let vals: Vec<f64> = centred.iter().map(|c| f(c)).collect();
        let m = vals.iter().sum::<f64>() / tf;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (tf - 1.0);
        (var / tf).sqrt()
    };
    let mean_se = (0..d).map(|j| se(&|c: &[f64]| c[j])).collect();
    let mut cov = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            cov.as_mut_slice()[i * d + j] = se(&|c: &[f64]| c[i] * c[j]);
        }
    }
    Ok(MomentErrors {
        mean: mean_se,
        covariance: cov,
    })
}

/// Stochastic forward passes at `x`, one row per sample.
pub fn mc_samples(spec: &NetworkSpec, params: &ParamSet, cfg: &McConfig, x: &[f64], point: u64) -> Result<Matrix> {
    cfg.validate(spec)?;
    params.validate(spec)?;
    let rows = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|t| {
            let masks = cfg.masks(spec, point, t)?;
            forward(spec, params, &masks, x)
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// MC dropout predictive summary at a single input (point id 0).
pub fn mc_predict(spec: &NetworkSpec, params: &ParamSet, cfg: &McConfig, x: &[f64]) -> Result<PredictiveSummary> {
    mc_predict_point(spec, params, cfg, x, 0)
}

/// As [`mc_predict`], drawing masks from the streams of input `point`.
pub fn mc_predict_point(
    spec: &NetworkSpec,
    params: &ParamSet,
    cfg: &McConfig,
    x: &[f64],
    point: u64,
) -> Result<PredictiveSummary> {
    let samples = mc_samples(spec, params, cfg, x, point)?;
    PredictiveSummary::from_samples(samples, cfg.tau)
}

/// One summary per row of `inputs`; row `n` uses point id `n`.
pub fn mc_predict_batch(
    spec: &NetworkSpec,
    params: &ParamSet,
    cfg: &McConfig,
    inputs: &Matrix,
) -> Result<Vec<PredictiveSummary>> {
    if inputs.cols() != spec.input_dim() {
        return Err(contract(format!(
            "inputs have {} columns, network expects {}",
            inputs.cols(),
            spec.input_dim()
        )));
    }
    (0..inputs.rows())
        .map(|n| mc_predict_point(spec, params, cfg, inputs.row(n), n as u64))
        .collect()
}

/// Calls `visit(probability, masks)` for every Bernoulli mask configuration
/// with nonzero probability.
pub fn enumerate_masks(
    spec: &NetworkSpec,
    keep_probs: &[f64],
    mut visit: impl FnMut(f64, &MaskSet) -> Result<()>,
) -> Result<()> {
    validate_keep_probs(spec, keep_probs)?;
    let bits = spec.mask_bits();
    if bits > MAX_ENUMERATION_BITS {
        return Err(contract(format!(
            "{bits} mask bits exceed the enumeration budget of {MAX_ENUMERATION_BITS}"
        )));
    }
    // owner layer of each bit
    let layer_of: Vec<f64> = spec.widths()[..spec.num_weight_layers()]
        .iter()
        .zip(keep_probs)
        .flat_map(|(&w, &p)| std::iter::repeat_n(p, w))
        .collect();
    let mut masks = MaskSet::ones(spec);
    masks.keep_probs = keep_probs.to_vec();
    for code in 0u64..(1u64 << bits) {
        let mut prob = 1.0;
        let mut bit = 0;
        for m in masks.masks.iter_mut() {
            for z in m.iter_mut() {
                let on = (code >> bit) & 1 == 1;
                let p = layer_of[bit];
                prob *= if on { p } else { 1.0 - p };
                *z = if on { 1.0 } else { 0.0 };
                bit += 1;
            }
        }
        if prob > 0.0 {
            visit(prob, &masks)?;
        }
    }
    Ok(())
}

/// Exact predictive moments by summing over every mask configuration.
pub fn enumerate_masks_oracle(
    spec: &NetworkSpec,
    params: &ParamSet,
    keep_probs: &[f64],
    tau: f64,
    x: &[f64],
) -> Result<PredictiveSummary> {
    check_tau(tau)?;
    params.validate(spec)?;
    let mut outputs = Vec::new();
    enumerate_masks(spec, keep_probs, |p, masks| {
        outputs.push((p, forward(spec, params, masks, x)?));
        Ok(())
    })?;
    Ok(PredictiveSummary::from_weighted(&outputs, 1.0 / tau))
}

/// Log predictive density of `y` under the MC mixture
/// `(1/T) sum_t N(y; yhat_t, tau^-1 I_D)`:
///
/// `logsumexp(-tau/2 ||y - yhat_t||^2) - log T - (D/2) log 2 pi - (D/2) log tau^-1`.
pub fn predictive_log_likelihood(samples: &Matrix, y: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if samples.rows() == 0 {
        return Err(contract("predictive likelihood needs at least one sample"));
    }
    if samples.cols() != y.len() {
        return Err(contract(format!(
            "samples have {} outputs, target has {}",
            samples.cols(),
            y.len()
        )));
    }
    let d = y.len() as f64;
    let exponents: Vec<f64> = samples
        .row_iter()
        .map(|r| -0.5 * tau * r.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    Ok(log_mean_exp(&exponents)? - 0.5 * d * LN_2PI + 0.5 * d * tau.ln())
}

/// Sorted per-point uncertainties of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    values: Vec<f64>,
}

impl CalibrationTable {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(contract("calibration table needs at least one entry"));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(domain("calibration entries must be finite and nonnegative"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn from_summaries(summaries: &[PredictiveSummary]) -> Result<Self> {
        Self::new(summaries.iter().map(PredictiveSummary::uncertainty).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Empirical CDF of the table at `std`, linear between order statistics:
/// 0 below the smallest entry, `#{v <= std} / n` at each entry, 1 from the
/// largest entry up.
pub fn calibration_percentile(table: &CalibrationTable, std: f64) -> Result<f64> {
    if !(std >= 0.0) {
        return Err(domain(format!("standard deviation {std} must be nonnegative")));
    }
    let v = &table.values;
    let n = v.len();
    let k = v.partition_point(|&e| e <= std);
    if k == 0 {
        return Ok(0.0);
    }
    if k == n {
        return Ok(1.0);
    }
    let (lo, hi) = (v[k - 1], v[k]);
    let frac = (std - lo) / (hi - lo);
    Ok((k as f64 + frac) / n as f64)
}

/// Deterministic "standard dropout" prediction: every weight matrix scaled
/// by its keep probability, no sampling.
pub fn weight_averaged_predict(
    spec: &NetworkSpec,
    params: &ParamSet,
    keep_probs: &[f64],
    x: &[f64],
) -> Result<Vec<f64>> {
    validate_keep_probs(spec, keep_probs)?;
    forward_unmasked(spec, &params.scale_weights(keep_probs), x)
}
