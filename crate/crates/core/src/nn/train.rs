use super::cost::{sample_masks_per_point, WeightDecay};
use super::grad::cost_and_gradient;
use super::network::{validate_keep_probs, MaskSet, NetworkSpec, ParamSet};
use crate::data::Dataset;
use crate::error::{contract, domain, Error, Result};
use crate::numerics::RngState;

/// Momentum SGD with the `base_lr * (1 + gamma * iter)^(-power)` policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub base_lr: f64,
    pub gamma: f64,
    pub power: f64,
    pub momentum: f64,
    pub iterations: usize,
    /// Minibatch size `M`; `None` uses the full dataset every step.
    pub batch_size: Option<usize>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            base_lr: 0.01,
            gamma: 1e-4,
            power: 0.25,
            momentum: 0.9,
            iterations: 1000,
            batch_size: None,
        }
    }
}

pub fn learning_rate(schedule: &Schedule, iter: usize) -> f64 {
    schedule.base_lr * (1.0 + schedule.gamma * iter as f64).powf(-schedule.power)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ParamSet,
    /// Minibatch cost at each iteration, evaluated before the update.
    pub losses: Vec<f64>,
}

/// Minibatch cost `(1/M) sum_{n in S} loss_n + penalty`, point `indices[k]`
/// under `masks[k]`. Averaged over uniformly random `S` its data term is an
/// unbiased estimate of the full-data term.
pub fn minibatch_cost(
    spec: &NetworkSpec,
    params: &ParamSet,
    decay: &WeightDecay,
    data: &Dataset,
    indices: &[usize],
    masks: &[MaskSet],
) -> Result<f64> {
    Ok(cost_and_gradient(spec, params, decay, data, indices, masks)?.0)
}

/// Trains with fresh dropout masks for every point of every minibatch.
///
/// Each step draws `M` distinct points, samples one mask set per point,
/// evaluates the minibatch cost and its gradient under those masks and
/// applies `v <- momentum * v - lr * g; theta <- theta + v`. Draws come
/// from `rng` in a fixed order, so equal seeds give bit-identical runs.
pub fn sgd_train(
    spec: &NetworkSpec,
    init: &ParamSet,
    decay: &WeightDecay,
    keep_probs: &[f64],
    data: &Dataset,
    schedule: &Schedule,
    rng: &mut RngState,
) -> Result<TrainOutput> {
    init.validate(spec)?;
    decay.validate(spec)?;
    validate_keep_probs(spec, keep_probs)?;
    let n = data.len();
    let m = schedule.batch_size.unwrap_or(n);
    if m == 0 || m > n {
        return Err(contract(format!("minibatch size {m} for {n} data points")));
    }
    if !(schedule.base_lr >= 0.0) || !(0.0..1.0).contains(&schedule.momentum) {
        return Err(domain("learning rate must be >= 0 and momentum in [0, 1)"));
    }

    let mut params = init.clone();
    let mut velocity = ParamSet::zeros(spec);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::with_capacity(schedule.iterations);

    for iter in 0..schedule.iterations {
        let batch: Vec<usize> = if m == n {
            order.clone()
        } else {
            rng.partial_shuffle(&mut order, m);
            order[..m].to_vec()
        };
        let masks = sample_masks_per_point(spec, keep_probs, m, rng)?;
        let (loss, grad) = cost_and_gradient(spec, &params, decay, data, &batch, &masks)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                iteration: iter,
                value: loss,
            });
        }
        losses.push(loss);

        let lr = learning_rate(schedule, iter);
        let mut step = velocity.clone();
        for w in &mut step.weights {
            *w = w.scale(schedule.momentum);
        }
        for b in step.biases.iter_mut().chain(step.output_bias.as_mut()) {
            b.iter_mut().for_each(|v| *v *= schedule.momentum);
        }
        step.axpy(-lr, &grad);
        params.axpy(1.0, &step);
        velocity = step;

        if log::log_enabled!(log::Level::Debug) && iter % 1000 == 0 {
            log::debug!("iter {iter}: loss {loss:.6e}, lr {lr:.3e}");
        }
    }
    Ok(TrainOutput { params, losses })
}
