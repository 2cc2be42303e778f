//! KL divergences between Gaussian mixtures and an isotropic normal prior.
//!
//! For well separated components in high dimension the mixture KL is close
//! to the weighted sum of per-component Gaussian KLs minus the entropy of the
//! mixing weights. [`kl_mog_approx`] evaluates that closed form,
//! [`mc_kl_oracle`] estimates the true value by sampling.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{contract, domain, Result};
use crate::nn::ParamSet;
use crate::numerics::{logsumexp, mean_and_std_error, Matrix, RngState};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Smallest Cholesky pivot accepted, relative to the largest diagonal entry.
const PIVOT_TOL: f64 = 1e-12;
const SHARD: usize = 4096;

/// Covariance of one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `v I`
    Isotropic(f64),
    Diagonal(Vec<f64>),
    Full(Matrix),
}

impl Covariance {
    fn check(&self, k: usize) -> Result<()> {
        match self {
            Covariance::Isotropic(v) if !(*v >= 0.0 && v.is_finite()) => {
                Err(domain(format!("isotropic variance {v} must be finite and >= 0")))
            }
            Covariance::Diagonal(d) if d.len() != k => {
                Err(contract(format!("diagonal covariance of length {} in dimension {k}", d.len())))
            }
            Covariance::Diagonal(d) if d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) => {
                Err(domain("diagonal covariance entries must be finite and >= 0"))
            }
            Covariance::Full(m) if m.shape() != (k, k) => {
                Err(contract(format!("{:?} covariance in dimension {k}", m.shape())))
            }
            Covariance::Full(m) if !m.is_symmetric(1e-12) => Err(domain("covariance is not symmetric")),
            _ => Ok(()),
        }
    }

    fn trace(&self, k: usize) -> f64 {
        match self {
            Covariance::Isotropic(v) => *v * k as f64,
            Covariance::Diagonal(d) => d.iter().sum(),
            Covariance::Full(m) => m.trace(),
        }
    }

    fn factor(&self, k: usize) -> Result<Factor> {
        let singular = || domain("covariance is singular; its log-determinant is undefined");
        match self {
            Covariance::Isotropic(v) => {
                if *v <= 0.0 {
                    return Err(singular());
                }
                Ok(Factor::Isotropic {
                    std: v.sqrt(),
                    var: *v,
                    log_det: k as f64 * v.ln(),
                })
            }
            Covariance::Diagonal(d) => {
                let max = d.iter().cloned().fold(0.0, f64::max);
                if d.iter().any(|&v| v <= PIVOT_TOL * max) || max == 0.0 {
                    return Err(singular());
                }
                Ok(Factor::Diagonal {
                    std: d.iter().map(|v| v.sqrt()).collect(),
                    var: d.clone(),
                    log_det: d.iter().map(|v| v.ln()).sum(),
                })
            }
            Covariance::Full(m) => {
                let max = (0..k).map(|i| m[(i, i)]).fold(0.0, f64::max);
                let dm = DMatrix::from_row_slice(k, k, m.as_slice());
                let chol = dm.cholesky().ok_or_else(singular)?;
                let l = chol.unpack();
                let pivots: Vec<f64> = (0..k).map(|i| l[(i, i)] * l[(i, i)]).collect();
                if max == 0.0 || pivots.iter().any(|&p| p <= PIVOT_TOL * max) {
                    return Err(singular());
                }
                let log_det = pivots.iter().map(|p| p.ln()).sum();
                Ok(Factor::Cholesky { l, log_det })
            }
        }
    }
}

enum Factor {
    Isotropic { std: f64, var: f64, log_det: f64 },
    Diagonal { std: Vec<f64>, var: Vec<f64>, log_det: f64 },
    Cholesky { l: DMatrix<f64>, log_det: f64 },
}

impl Factor {
    fn log_det(&self) -> f64 {
        match self {
            Factor::Isotropic { log_det, .. }
            | Factor::Diagonal { log_det, .. }
            | Factor::Cholesky { log_det, .. } => *log_det,
        }
    }

    /// `mu + L eps` with `L L^T = Sigma`.
    fn sample(&self, mu: &[f64], rng: &mut RngState, out: &mut [f64]) {
        match self {
            Factor::Isotropic { std, .. } => {
                for (o, m) in out.iter_mut().zip(mu) {
                    *o = m + std * rng.normal();
                }
            }
            Factor::Diagonal { std, .. } => {
                for ((o, m), s) in out.iter_mut().zip(mu).zip(std) {
                    *o = m + s * rng.normal();
                }
            }
            Factor::Cholesky { l, .. } => {
                let eps: Vec<f64> = (0..mu.len()).map(|_| rng.normal()).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = mu[i] + (0..=i).map(|j| l[(i, j)] * eps[j]).sum::<f64>();
                }
            }
        }
    }

    fn log_density(&self, x: &[f64], mu: &[f64]) -> f64 {
        let k = x.len() as f64;
        let quad = match self {
            Factor::Isotropic { var, .. } => {
                x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / var
            }
            Factor::Diagonal { var, .. } => x
                .iter()
                .zip(mu)
                .zip(var)
                .map(|((a, b), v)| (a - b) * (a - b) / v)
                .sum(),
            Factor::Cholesky { l, .. } => {
                // forward substitution L y = x - mu
                let n = x.len();
                let mut y = vec![0.0; n];
                for i in 0..n {
                    let s: f64 = (0..i).map(|j| l[(i, j)] * y[j]).sum();
                    y[i] = (x[i] - mu[i] - s) / l[(i, i)];
                }
                y.iter().map(|v| v * v).sum()
            }
        };
        -0.5 * (k * LN_2PI + self.log_det() + quad)
    }
}

/// A Gaussian mixture `sum_i p_i N(mu_i, Sigma_i)` in dimension `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Covariance>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Covariance>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covariances.len() {
            return Err(contract("mixture needs matching, non-empty weights, means and covariances"));
        }
        if weights.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(domain("mixture weights must lie in [0, 1]"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("mixture weights sum to {total}, not 1")));
        }
        let k = means[0].len();
        if k == 0 || means.iter().any(|m| m.len() != k) {
            return Err(contract("all component means must share a positive dimension"));
        }
        for c in &covariances {
            c.check(k)?;
        }
        Ok(Self {
            weights,
            means,
            covariances,
        })
    }

    /// One Gaussian with weight 1.
    pub fn single(mean: Vec<f64>, covariance: Covariance) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![covariance])
    }

    /// `p N(mean, v I) + (1 - p) N(0, v I)`: the distribution placed on one
    /// row of a dropout weight matrix.
    pub fn dropout_row(keep_prob: f64, mean: Vec<f64>, variance: f64) -> Result<Self> {
        let k = mean.len();
        Self::new(
            vec![keep_prob, 1.0 - keep_prob],
            vec![mean, vec![0.0; k]],
            vec![Covariance::Isotropic(variance); 2],
        )
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Covariance] {
        &self.covariances
    }

    /// The same mixture with components reordered: `order[j]` is the old index of new component `j`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.num_components()];
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(contract("not a permutation of the components"));
            }
        }
        if order.len() != seen.len() {
            return Err(contract("not a permutation of the components"));
        }
        Ok(Self {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            means: order.iter().map(|&i| self.means[i].clone()).collect(),
            covariances: order.iter().map(|&i| self.covariances[i].clone()).collect(),
        })
    }

    /// Entropy of the mixing weights, `-sum p log p` with `0 log 0 = 0`.
    pub fn weight_entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    fn active(&self) -> impl Iterator<Item = (f64, &Vec<f64>, &Covariance)> {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.covariances)
            .filter(|((p, _), _)| **p > 0.0)
            .map(|((p, m), c)| (*p, m, c))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_scale(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain(format!("prior length-scale {l} must be positive")));
    }
    Ok(())
}

/// Closed-form large-`K` approximation of `KL(q || N(0, I_K))`:
///
/// `sum_i p_i/2 (mu_i^T mu_i + tr Sigma_i - K(1 + log 2 pi) - log|Sigma_i|) - H(p)`
///
/// where `H(p)` is the entropy of the mixing weights. It differs from the
/// true KL by a constant; for a single component that constant is
/// `-(K/2) log 2 pi`.
pub fn kl_mog_approx(q: &MixtureSpec) -> Result<f64> {
    let k = q.dim() as f64;
    let mut total = 0.0;
    for (p, mu, cov) in q.active() {
        let f = cov.factor(q.dim())?;
        total += p / 2.0 * (dot(mu, mu) + cov.trace(q.dim()) - k * (1.0 + LN_2PI) - f.log_det());
    }
    Ok(total - q.weight_entropy())
}

/// Gradient of [`kl_mog_approx`] with respect to each component mean: `p_i mu_i`.
pub fn kl_mog_approx_mean_gradient(q: &MixtureSpec) -> Vec<Vec<f64>> {
    q.weights
        .iter()
        .zip(&q.means)
        .map(|(p, mu)| mu.iter().map(|m| p * m).collect())
        .collect()
}

/// `KL(N(mu, Sigma) || N(0, l^-2 I))`
/// `= 1/2 (l^2 mu^T mu + l^2 tr Sigma - K - log|Sigma| + K log l^-2)`.
pub fn analytic_gaussian_kl(mu: &[f64], covariance: &Covariance, lengthscale: f64) -> Result<f64> {
    check_scale(lengthscale)?;
    let k = mu.len();
    if k == 0 {
        return Err(contract("empty mean vector"));
    }
    covariance.check(k)?;
    let f = covariance.factor(k)?;
    Ok(gaussian_kl_with(mu, covariance, &f, lengthscale))
}

fn gaussian_kl_with(mu: &[f64], covariance: &Covariance, f: &Factor, l: f64) -> f64 {
    let k = mu.len() as f64;
    let l2 = l * l;
    0.5 * (l2 * dot(mu, mu) + l2 * covariance.trace(mu.len()) - k - f.log_det() - k * l2.ln())
}

/// Length-scale form of the approximation, constant omitted:
/// `sum_i p_i/2 (l^2 mu_i^T mu_i + l^2 tr Sigma_i - K - log|Sigma_i| + K log l^-2)`.
pub fn kl_mog_approx_lengthscale(q: &MixtureSpec, lengthscale: f64) -> Result<f64> {
    check_scale(lengthscale)?;
    let mut total = 0.0;
    for (p, mu, cov) in q.active() {
        let f = cov.factor(q.dim())?;
        total += p * gaussian_kl_with(mu, cov, &f, lengthscale);
    }
    Ok(total)
}

/// `sigma^2 - log sigma^2 - 1`, infinite at `sigma = 0`.
pub fn sigma_penalty(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(domain(format!("variational std {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(f64::INFINITY);
    }
    let s2 = sigma * sigma;
    Ok(s2 - s2.ln() - 1.0)
}

/// Which constant multiplies the `sigma` part of a weight-matrix KL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaConvention {
    /// `(QK/2)(sigma^2 - log sigma^2 - 1)`, from applying the mixture
    /// approximation to each row.
    #[default]
    RowWise,
    /// `QK(sigma^2 - log sigma^2 - 1)`.
    Doubled,
}

/// A KL term split into the part driven by the means and the part driven
/// by `sigma`. The latter is `+inf` when `sigma = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlTerm {
    pub mean: f64,
    pub sigma: f64,
}

impl KlTerm {
    pub fn total(&self) -> f64 {
        self.mean + self.sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutKl {
    pub weights: Vec<KlTerm>,
    pub biases: Vec<KlTerm>,
}

impl DropoutKl {
    pub fn total(&self) -> f64 {
        self.weights.iter().chain(&self.biases).map(KlTerm::total).sum()
    }

    /// Sum of the mean parts only; finite even when `sigma = 0`.
    pub fn mean_total(&self) -> f64 {
        self.weights.iter().chain(&self.biases).map(|t| t.mean).sum()
    }
}

/// KL terms for the dropout variational family, up to additive constants:
/// weight layer `i` gives `(p_i/2) ||M_i||^2` plus the `sigma` part,
/// hidden bias `i` gives `1/2 (m_i^T m_i + K_i (sigma^2 - log sigma^2 - 1))`.
/// An output bias has no prior and contributes nothing.
pub fn dropout_kl_terms(
    params: &ParamSet,
    keep_probs: &[f64],
    sigma: f64,
    convention: SigmaConvention,
) -> Result<DropoutKl> {
    let pen = sigma_penalty(sigma)?;
    if keep_probs.len() != params.weights.len() {
        return Err(contract(format!(
            "{} keep probabilities for {} weight layers",
            keep_probs.len(),
            params.weights.len()
        )));
    }
    if keep_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(domain("keep probabilities must lie in [0, 1]"));
    }
    let factor = match convention {
        SigmaConvention::RowWise => 0.5,
        SigmaConvention::Doubled => 1.0,
    };
    let weights = params
        .weights
        .iter()
        .zip(keep_probs)
        .map(|(m, &p)| KlTerm {
            mean: p / 2.0 * m.squared_norm(),
            sigma: factor * (m.rows() * m.cols()) as f64 * pen,
        })
        .collect();
    let biases = params
        .biases
        .iter()
        .map(|b| KlTerm {
            mean: 0.5 * dot(b, b),
            sigma: 0.5 * b.len() as f64 * pen,
        })
        .collect();
    Ok(DropoutKl { weights, biases })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// How [`mc_kl_oracle_with`] reduces variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceReduction {
    /// Plain average of `log q(x) - log p(x)` over `x ~ q`.
    #[default]
    None,
    /// Averages `log q(x) - log p_c q_c(x)` for `x` drawn from component
    /// `c`, then adds the exact mean `sum_c p_c (log p_c + KL(q_c || p))` of
    /// the subtracted term. Only the overlap between components is sampled.
    ComponentControlVariate,
}

/// `KL(q || N(0, l^-2 I))` by sampling: the mean of
/// `log q(x_s) - log p(x_s)` over `x_s ~ q`, with standard error `s / sqrt(S)`.
pub fn mc_kl_oracle(q: &MixtureSpec, lengthscale: f64, samples: usize, rng: &mut RngState) -> Result<McEstimate> {
    mc_kl_oracle_with(q, lengthscale, samples, VarianceReduction::None, rng)
}

/// [`mc_kl_oracle`] with an explicit variance-reduction scheme.
///
/// Samples are drawn in fixed-size shards, each on its own stream keyed by
/// one draw from `rng`, so the result does not depend on thread count.
pub fn mc_kl_oracle_with(
    q: &MixtureSpec,
    lengthscale: f64,
    samples: usize,
    reduction: VarianceReduction,
    rng: &mut RngState,
) -> Result<McEstimate> {
    check_scale(lengthscale)?;
    if samples < 2 {
        return Err(contract("Monte Carlo KL needs at least two samples"));
    }
    let k = q.dim();
    let comps: Vec<(f64, &Vec<f64>, &Covariance, Factor)> = q
        .active()
        .map(|(p, m, c)| c.factor(k).map(|f| (p, m, c, f)))
        .collect::<Result<_>>()?;
    let l2 = lengthscale * lengthscale;
    let log_prior = |x: &[f64]| -0.5 * (k as f64) * (LN_2PI - l2.ln()) - 0.5 * l2 * dot(x, x);
    let known_mean: f64 = comps
        .iter()
        .map(|(p, m, c, f)| p * (p.ln() + gaussian_kl_with(m, c, f, lengthscale)))
        .sum();

    let key = rng.next_u64();
    let shards = samples.div_ceil(SHARD);
    let values: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut r = RngState::new(key, s as u64);
            let count = SHARD.min(samples - s * SHARD);
            let mut x = vec![0.0; k];
            let mut logs = vec![0.0; comps.len()];
            let comps = &comps;
            (0..count)
                .map(move |_| {
                    let u = r.uniform();
                    let mut c = comps.len() - 1;
                    let mut acc = 0.0;
                    for (i, (p, ..)) in comps.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            c = i;
                            break;
                        }
                    }
                    let (_, mu, _, f) = &comps[c];
                    f.sample(mu, &mut r, &mut x);
                    for (l, (p, m, _, f)) in logs.iter_mut().zip(comps) {
                        *l = p.ln() + f.log_density(&x, m);
                    }
                    let lp = log_prior(&x);
                    let log_q = logsumexp(&logs).unwrap_or(f64::NAN);
                    match reduction {
                        VarianceReduction::None => log_q - lp,
                        VarianceReduction::ComponentControlVariate => log_q - logs[c],
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (mut estimate, std_error) = mean_and_std_error(&values);
    if reduction == VarianceReduction::ComponentControlVariate {
        estimate += known_mean;
    }
    Ok(McEstimate {
        estimate,
        std_error,
        samples,
    })
}
