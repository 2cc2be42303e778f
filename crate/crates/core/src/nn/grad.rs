use super::cost::{log_softmax_at, WeightDecay};
use super::network::{forward_trace, MaskSet, NetworkSpec, ParamSet};
use crate::data::{Dataset, Targets};
use crate::error::{contract, Result};
use crate::numerics::logsumexp;

/// Cost and its exact gradient with respect to every parameter, the masks
/// held fixed between the forward and backward pass.
pub fn gradients(
    spec: &NetworkSpec,
    params: &ParamSet,
    decay: &WeightDecay,
    batch: &Dataset,
    masks: &[MaskSet],
) -> Result<(f64, ParamSet)> {
    let all: Vec<usize> = (0..batch.len()).collect();
    cost_and_gradient(spec, params, decay, batch, &all, masks)
}

/// Cost over the rows `indices` of `data` (`masks[k]` for `indices[k]`).
pub(crate) fn cost_and_gradient(
    spec: &NetworkSpec,
    params: &ParamSet,
    decay: &WeightDecay,
    data: &Dataset,
    indices: &[usize],
    masks: &[MaskSet],
) -> Result<(f64, ParamSet)> {
    params.validate(spec)?;
    decay.validate(spec)?;
    if masks.len() != indices.len() {
        return Err(contract(format!(
            "{} mask sets for {} points",
            masks.len(),
            indices.len()
        )));
    }
    if indices.is_empty() {
        return Err(contract("gradient over an empty batch"));
    }
    if data.targets.output_dim() != spec.output_dim() {
        return Err(contract("target width does not match the network output"));
    }
    let m = indices.len() as f64;
    let last = spec.num_weight_layers() - 1;
    let mut grad = ParamSet::zeros(spec);
    let mut loss = 0.0;

    for (&n, mask) in indices.iter().zip(masks) {
        mask.validate(spec)?;
        let trace = forward_trace(spec, params, mask, data.inputs.row(n))?;
        // dE/d(output) for this point.
        let mut delta: Vec<f64> = match &data.targets {
            Targets::Regression(y) => {
                let y = y.row(n);
                loss += trace
                    .output
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / (2.0 * m);
                trace.output.iter().zip(y).map(|(a, b)| (a - b) / m).collect()
            }
            Targets::Classification { labels, .. } => {
                let c = labels[n];
                loss -= log_softmax_at(&trace.output, c)? / m;
                let lse = logsumexp(&trace.output)?;
                trace
                    .output
                    .iter()
                    .enumerate()
                    .map(|(d, &v)| ((v - lse).exp() - if d + 1 == c { 1.0 } else { 0.0 }) / m)
                    .collect()
            }
        };

        if let Some(g) = grad.output_bias.as_mut() {
            for (g, d) in g.iter_mut().zip(&delta) {
                *g += d;
            }
        }
        for i in (0..=last).rev() {
            let input = &trace.inputs[i];
            let gw = &mut grad.weights[i];
            for (r, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (g, d) in gw.row_mut(r).iter_mut().zip(&delta) {
                    *g += a * d;
                }
            }
            if i < last {
                for (g, d) in grad.biases[i].iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            if i == 0 {
                break;
            }
            // Back through the mask, the feature scaling and the nonlinearity
            // of hidden layer i - 1.
            let w = &params.weights[i];
            let z = &mask.masks[i];
            let s = spec.feature_scale(i - 1);
            let pre = &trace.pre[i - 1];
            delta = (0..w.rows())
                .map(|r| {
                    let back: f64 = w.row(r).iter().zip(&delta).map(|(a, b)| a * b).sum();
                    back * z[r] * s * spec.nonlinearity.derivative(pre[r])
                })
                .collect();
        }
    }

    // Decay terms: d(lambda ||M||^2) = 2 lambda M.
    for ((g, w), &l) in grad.weights.iter_mut().zip(&params.weights).zip(&decay.weights) {
        if l != 0.0 {
            g.axpy(2.0 * l, w)?;
        }
    }
    for ((g, b), &l) in grad.biases.iter_mut().zip(&params.biases).zip(&decay.biases) {
        for (g, b) in g.iter_mut().zip(b) {
            *g += 2.0 * l * b;
        }
    }
    if let (Some(g), Some(b)) = (grad.output_bias.as_mut(), params.output_bias.as_ref()) {
        for (g, b) in g.iter_mut().zip(b) {
            *g += 2.0 * decay.output_bias * b;
        }
    }
    Ok((loss + decay.penalty(params), grad))
}
