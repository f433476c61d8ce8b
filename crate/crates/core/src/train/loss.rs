use crate::nn::{self, Gradients, Mlp, NnError};
use crate::sim::ACTION_DIM;

use super::TrainError;

/// Clipped surrogate term `min(r A, clip(r, 1-eps, 1+eps) A)` and its
/// derivative with respect to `r`.
#[inline]
fn clipped_term(ratio: f64, adv: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

/// Mean clipped surrogate objective (to be maximised).
pub fn ppo_surrogate(ratios: &[f64], advantages: &[f64], clip: f64) -> f64 {
    assert_eq!(ratios.len(), advantages.len());
    if ratios.is_empty() {
        return 0.0;
    }
    ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| clipped_term(r, a, clip).0)
        .sum::<f64>()
        / ratios.len() as f64
}

/// Effective advantage `A - lambda_l * A_c - lambda_s * B` per sample.
pub fn lagrangian_advantages(
    advantages: &[f64],
    cost_advantages: &[f64],
    scores: &[f64],
    lambda_long: f64,
    lambda_short: f64,
) -> Result<Vec<f64>, TrainError> {
    let n = advantages.len();
    if cost_advantages.len() != n || scores.len() != n {
        return Err(NnError::Shape {
            context: "lagrangian advantage inputs",
            expected: n,
            actual: cost_advantages.len().min(scores.len()),
        }
        .into());
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let g = advantages[i] - lambda_long * cost_advantages[i] - lambda_short * scores[i];
        if !g.is_finite() {
            return Err(TrainError::NonFiniteAdvantage { index: i });
        }
        out.push(g);
    }
    Ok(out)
}

/// A minibatch of stored policy samples.
#[derive(Debug, Clone, Copy)]
pub struct PolicyBatch<'a> {
    /// `len x OBS_DIM`.
    pub observations: &'a [f64],
    /// Pre-clip actions, `len x ACTION_DIM`.
    pub raw_actions: &'a [f64],
    pub old_log_probs: &'a [f64],
}

impl PolicyBatch<'_> {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PolicyLoss {
    /// `-surrogate - entropy_coef * H`, the quantity minimised.
    pub loss: f64,
    pub grads: Gradients,
    pub clip_fraction: f64,
    /// Sample estimate of `KL(old || new)`.
    pub approx_kl: f64,
}

/// Clipped PPO loss for arbitrary per-sample advantages, with its gradient
/// with respect to the policy mean network and log-std.
pub fn policy_loss(
    policy: &Mlp,
    batch: PolicyBatch<'_>,
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<PolicyLoss, TrainError> {
    let n = batch.len();
    if n == 0 {
        return Err(NnError::EmptyBatch.into());
    }
    if advantages.len() != n || batch.raw_actions.len() != n * ACTION_DIM {
        return Err(NnError::Shape {
            context: "policy batch",
            expected: n,
            actual: advantages.len(),
        }
        .into());
    }
    let log_std = policy
        .log_std
        .as_deref()
        .expect("policy network carries a log-std head");
    let trace = policy.forward_trace(batch.observations, n)?;
    let means = trace.output();
    let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();

    let mut upstream = vec![0.0; n * ACTION_DIM];
    let mut d_log_std = vec![0.0; ACTION_DIM];
    let mut surrogate = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    for b in 0..n {
        let mean = &means[b * ACTION_DIM..(b + 1) * ACTION_DIM];
        let raw = &batch.raw_actions[b * ACTION_DIM..(b + 1) * ACTION_DIM];
        let log_ratio = nn::log_prob(mean, log_std, raw) - batch.old_log_probs[b];
        let ratio = log_ratio.exp();
        let (term, d_ratio) = clipped_term(ratio, advantages[b], clip);
        surrogate += term;
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        kl += (ratio - 1.0) - log_ratio;
        // d(-term)/d log_prob
        let c = -d_ratio * ratio;
        for i in 0..ACTION_DIM {
            let diff = raw[i] - mean[i];
            upstream[b * ACTION_DIM + i] = c * diff * inv_var[i];
            d_log_std[i] += c * (diff * diff * inv_var[i] - 1.0);
        }
    }
    let nf = n as f64;
    let mut grads = policy.backward(&trace, &upstream)?;
    if let Some(g) = grads.log_std.as_mut() {
        for i in 0..ACTION_DIM {
            g[i] = d_log_std[i] / nf - entropy_coef;
        }
    }
    Ok(PolicyLoss {
        loss: -surrogate / nf - entropy_coef * nn::entropy(log_std),
        grads,
        clip_fraction: clipped as f64 / nf,
        approx_kl: kl / nf,
    })
}

/// Policy loss on the Lagrangian advantage. With both multipliers at zero
/// this is exactly the plain PPO loss on `advantages`.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_objective(
    policy: &Mlp,
    batch: PolicyBatch<'_>,
    advantages: &[f64],
    cost_advantages: &[f64],
    scores: &[f64],
    lambda_long: f64,
    lambda_short: f64,
    clip: f64,
    entropy_coef: f64,
) -> Result<PolicyLoss, TrainError> {
    let g = lagrangian_advantages(advantages, cost_advantages, scores, lambda_long, lambda_short)?;
    policy_loss(policy, batch, &g, clip, entropy_coef)
}

/// Mean squared error of a scalar-output network and its gradient.
pub fn mse_loss(net: &Mlp, inputs: &[f64], targets: &[f64]) -> Result<(f64, Gradients), TrainError> {
    let n = targets.len();
    if n == 0 {
        return Err(NnError::EmptyBatch.into());
    }
    let trace = net.forward_trace(inputs, n)?;
    let pred = trace.output();
    let mut loss = 0.0;
    let upstream: Vec<f64> = pred
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let e = p - t;
            loss += e * e;
            2.0 * e
        })
        .collect();
    let grads = net.backward(&trace, &upstream)?;
    Ok((loss / n as f64, grads))
}

/// Losses and gradients of the reward and cost critics on one minibatch.
pub fn critic_losses(
    value: &Mlp,
    cost_value: &Mlp,
    observations: &[f64],
    returns: &[f64],
    cost_returns: &[f64],
) -> Result<((f64, Gradients), (f64, Gradients)), TrainError> {
    Ok((
        mse_loss(value, observations, returns)?,
        mse_loss(cost_value, observations, cost_returns)?,
    ))
}

/// Hinge loss of validation scores against window labels: the mean of
/// `max(B, 0)` over feasible windows plus the mean of `max(-B, 0)` over
/// infeasible ones. A class that is absent contributes nothing. Returns the
/// loss and `dL/dB` per window.
pub fn validation_hinge(scores: &[f64], feasible: &[bool]) -> (f64, Vec<f64>) {
    assert_eq!(scores.len(), feasible.len());
    let n_pos = feasible.iter().filter(|&&f| f).count();
    let n_neg = feasible.len() - n_pos;
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .zip(feasible)
        .map(|(&b, &f)| {
            if f {
                let w = 1.0 / n_pos as f64;
                loss += w * b.max(0.0);
                if b > 0.0 { w } else { 0.0 }
            } else {
                let w = 1.0 / n_neg as f64;
                loss += w * (-b).max(0.0);
                if b < 0.0 { -w } else { 0.0 }
            }
        })
        .collect();
    (loss, grad)
}

/// Hinge loss of the validation network on flattened windows, with its
/// parameter gradient.
pub fn validation_loss(net: &Mlp, inputs: &[f64], feasible: &[bool]) -> Result<(f64, Gradients), TrainError> {
    let n = feasible.len();
    if n == 0 {
        return Err(NnError::EmptyBatch.into());
    }
    let trace = net.forward_trace(inputs, n)?;
    let (loss, mut grad) = validation_hinge(trace.output(), feasible);
    // backward averages over the batch; the hinge already carries its own
    // per-class weights.
    grad.iter_mut().for_each(|g| *g *= n as f64);
    let grads = net.backward(&trace, &grad)?;
    Ok((loss, grads))
}
