//! The dual-constraint PPO learner.
//!
//! Each epoch collects a batch of on-policy experience, updates the two
//! Lagrange multipliers, fits the trajectory validation network, then runs
//! clipped-PPO passes on the Lagrangian advantage
//! `A - lambda_l * A_c - lambda_s * B(tau)` alongside the two critics.

mod lagrange;
mod loss;

pub use lagrange::{update_multipliers, ConstraintStats, LagrangeConfig, LagrangeState, MultiplierMode};
pub use loss::{
    critic_losses, lagrangian_advantages, lagrangian_objective, mse_loss, policy_loss, ppo_surrogate,
    validation_hinge, validation_loss, PolicyBatch, PolicyLoss,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::nn::{Gradients, Mlp, NnError};
use crate::rollout::{collect_rollout, extract_windows, ActionMode, EnvPool, RolloutBuffer, RolloutError};
use crate::seeding::{derive_seed, rng_for, stream};
use crate::sim::{ACTION_DIM, OBS_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error("non-finite Lagrangian advantage at sample {index}")]
    NonFiniteAdvantage { index: usize },
    #[error("non-finite {what} loss in epoch {epoch}")]
    NonFiniteLoss { what: &'static str, epoch: u64 },
}

/// Which constraint terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Both constraints.
    Lstc,
    /// Both multipliers pinned at zero.
    Ppo,
    /// Short-term multiplier pinned at zero.
    PpoLag,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::Lstc => "lstc",
            Ablation::Ppo => "ppo",
            Ablation::PpoLag => "ppo-lag",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lstc" => Ok(Ablation::Lstc),
            "ppo" => Ok(Ablation::Ppo),
            "ppo-lag" => Ok(Ablation::PpoLag),
            other => Err(format!("unknown mode `{other}` (expected lstc, ppo or ppo-lag)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub update_passes: usize,
    pub validation_passes: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub lr_cost_value: f64,
    pub lr_validation: f64,
    /// Global gradient-norm cap per network update; 0 disables clipping.
    pub max_grad_norm: f64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 20_000,
            minibatch_size: 2_000,
            update_passes: 10,
            validation_passes: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.0,
            lr_policy: 3e-4,
            lr_value: 3e-4,
            lr_cost_value: 3e-4,
            lr_validation: 3e-4,
            max_grad_norm: 0.5,
            workers: 1,
        }
    }
}

/// Summary of one training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: u64,
    /// Environment steps taken so far, this epoch included.
    pub steps: u64,
    pub ep_reward: f64,
    pub ep_cost: f64,
    pub discounted_cost: f64,
    pub success_rate: f64,
    pub feasible_rate: f64,
    pub positive_validation: f64,
    pub lambda_long: f64,
    pub lambda_short: f64,
    pub loss_pi: f64,
    pub loss_v: f64,
    pub loss_vc: f64,
    pub loss_b: f64,
    pub episodes: usize,
}

/// Mutable learner state: networks, multipliers and progress counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub agent: Agent,
    pub lagrange: LagrangeState,
    pub config: TrainConfig,
    pub mode: Ablation,
    pub window: usize,
    pub seed: u64,
    pub epoch: u64,
    pub steps: u64,
}

struct Batch {
    buffer: RolloutBuffer,
    windows: Vec<f64>,
    labels: Vec<bool>,
    win_dim: usize,
}

impl Trainer {
    pub fn new(
        agent: Agent,
        lagrange: &LagrangeConfig,
        config: TrainConfig,
        mode: Ablation,
        window: usize,
        seed: u64,
    ) -> Self {
        let mut lagrange = LagrangeState::new(lagrange);
        match mode {
            Ablation::Lstc => {}
            Ablation::Ppo => {
                lagrange.lambda_long = 0.0;
                lagrange.lambda_short = 0.0;
            }
            Ablation::PpoLag => lagrange.lambda_short = 0.0,
        }
        Self {
            agent,
            lagrange,
            config,
            mode,
            window,
            seed,
            epoch: 0,
            steps: 0,
        }
    }

    /// Runs one epoch. On error every field is restored to its value at the
    /// start of the call.
    pub fn train_epoch(&mut self, pool: &EnvPool) -> Result<EpochReport, TrainError> {
        let snapshot = self.clone();
        let result = self.train_epoch_inner(pool);
        if result.is_err() {
            *self = snapshot;
        }
        result
    }

    fn train_epoch_inner(&mut self, pool: &EnvPool) -> Result<EpochReport, TrainError> {
        let cfg = self.config.clone();
        let epoch = self.epoch;
        let rollout_seed = derive_seed(self.seed, &[stream::ROLLOUT, epoch]);
        let pool = EnvPool {
            workers: cfg.workers,
            ..pool.clone()
        };
        let mut buffer = collect_rollout(&pool, &self.agent, cfg.batch_size, rollout_seed, ActionMode::Sample)?;
        buffer.compute_advantages(cfg.gamma, cfg.gae_lambda)?;
        let batch = self.windows(buffer);
        let n = batch.buffer.len();

        // Epoch statistics and multipliers.
        let episodes = batch.buffer.episodes(cfg.gamma);
        let complete: Vec<_> = episodes.iter().filter(|e| e.end.is_complete()).collect();
        let counted: Vec<_> = if complete.is_empty() {
            episodes.iter().collect()
        } else {
            complete
        };
        let m = counted.len() as f64;
        let ep_reward = counted.iter().map(|e| e.reward).sum::<f64>() / m;
        let ep_cost = counted.iter().map(|e| e.cost).sum::<f64>() / m;
        let discounted_cost = counted.iter().map(|e| e.discounted_cost).sum::<f64>() / m;
        let success_rate = counted
            .iter()
            .filter(|e| e.end == crate::rollout::EpisodeEnd::Success)
            .count() as f64
            / m;

        let scores_before = self.agent.validation.forward_batch(&batch.windows, n)?;
        let positive_validation = scores_before.iter().map(|b| b.max(0.0)).sum::<f64>() / n as f64;
        let stats = ConstraintStats {
            discounted_cost,
            positive_validation,
        };
        match self.mode {
            Ablation::Lstc => self.lagrange.update(stats),
            Ablation::PpoLag => {
                self.lagrange.update(stats);
                self.lagrange.lambda_short = 0.0;
            }
            Ablation::Ppo => {}
        }

        // Validation network.
        let mut shuffle = rng_for(self.seed, &[stream::SHUFFLE, epoch]);
        let mut order: Vec<usize> = (0..n).collect();
        let mb = cfg.minibatch_size.clamp(1, n);
        let mut loss_b = 0.0;
        let mut count_b = 0usize;
        if self.mode == Ablation::Lstc {
            let mut inputs = Vec::with_capacity(mb * batch.win_dim);
            let mut labels = Vec::with_capacity(mb);
            for _ in 0..cfg.validation_passes {
                order.shuffle(&mut shuffle);
                for chunk in order.chunks(mb) {
                    inputs.clear();
                    labels.clear();
                    for &i in chunk {
                        inputs.extend_from_slice(&batch.windows[i * batch.win_dim..(i + 1) * batch.win_dim]);
                        labels.push(batch.labels[i]);
                    }
                    let (loss, grads) = validation_loss(&self.agent.validation, &inputs, &labels)?;
                    check(loss, "validation", epoch)?;
                    step(&mut self.agent.validation, grads, cfg.lr_validation, cfg.max_grad_norm)?;
                    loss_b += loss;
                    count_b += 1;
                }
            }
        }
        let scores = if self.mode == Ablation::Lstc {
            self.agent.validation.forward_batch(&batch.windows, n)?
        } else {
            scores_before
        };
        if count_b == 0 {
            loss_b = validation_hinge(&scores, &batch.labels).0;
            count_b = 1;
        }

        // Policy and critics.
        let buf = &batch.buffer;
        let mut obs = Vec::with_capacity(mb * OBS_DIM);
        let mut raw = Vec::with_capacity(mb * ACTION_DIM);
        let (mut old, mut adv, mut cadv, mut sc, mut ret, mut cret) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut loss_pi, mut loss_v, mut loss_vc, mut count) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..cfg.update_passes {
            order.shuffle(&mut shuffle);
            for chunk in order.chunks(mb) {
                obs.clear();
                raw.clear();
                for v in [&mut old, &mut adv, &mut cadv, &mut sc, &mut ret, &mut cret] {
                    v.clear();
                }
                for &i in chunk {
                    obs.extend_from_slice(buf.observation(i));
                    raw.extend_from_slice(&buf.raw_actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
                    old.push(buf.log_probs[i]);
                    adv.push(buf.advantages[i]);
                    cadv.push(buf.cost_advantages[i]);
                    sc.push(scores[i]);
                    ret.push(buf.returns[i]);
                    cret.push(buf.cost_returns[i]);
                }
                let pb = PolicyBatch {
                    observations: &obs,
                    raw_actions: &raw,
                    old_log_probs: &old,
                };
                let pl = lagrangian_objective(
                    &self.agent.policy,
                    pb,
                    &adv,
                    &cadv,
                    &sc,
                    self.lagrange.lambda_long,
                    self.lagrange.lambda_short,
                    cfg.clip,
                    cfg.entropy_coef,
                )?;
                check(pl.loss, "policy", epoch)?;
                step(&mut self.agent.policy, pl.grads, cfg.lr_policy, cfg.max_grad_norm)?;
                let ((lv, gv), (lc, gc)) =
                    critic_losses(&self.agent.value, &self.agent.cost_value, &obs, &ret, &cret)?;
                check(lv, "value", epoch)?;
                check(lc, "cost value", epoch)?;
                step(&mut self.agent.value, gv, cfg.lr_value, cfg.max_grad_norm)?;
                step(&mut self.agent.cost_value, gc, cfg.lr_cost_value, cfg.max_grad_norm)?;
                loss_pi += pl.loss;
                loss_v += lv;
                loss_vc += lc;
                count += 1;
            }
        }
        let count = count.max(1) as f64;

        self.epoch += 1;
        self.steps += n as u64;
        let report = EpochReport {
            epoch: self.epoch,
            steps: self.steps,
            ep_reward,
            ep_cost,
            discounted_cost,
            success_rate,
            feasible_rate: buf.feasible_rate(),
            positive_validation,
            lambda_long: self.lagrange.lambda_long,
            lambda_short: self.lagrange.lambda_short,
            loss_pi: loss_pi / count,
            loss_v: loss_v / count,
            loss_vc: loss_vc / count,
            loss_b: loss_b / count_b as f64,
            episodes: counted.len(),
        };
        log::info!(
            "epoch {} steps {} reward {:.2} cost {:.3} success {:.2} feasible {:.3} lambda_l {:.3} lambda_s {:.3}",
            report.epoch,
            report.steps,
            report.ep_reward,
            report.ep_cost,
            report.success_rate,
            report.feasible_rate,
            report.lambda_long,
            report.lambda_short
        );
        Ok(report)
    }

    fn windows(&self, buffer: RolloutBuffer) -> Batch {
        let wins = extract_windows(&buffer, self.window);
        let win_dim = (self.window + 1) * OBS_DIM;
        let mut windows = Vec::with_capacity(wins.len() * win_dim);
        for w in &wins {
            w.gather_into(&buffer, &mut windows);
        }
        Batch {
            labels: wins.iter().map(|w| w.feasible).collect(),
            buffer,
            windows,
            win_dim,
        }
    }
}

fn check(loss: f64, what: &'static str, epoch: u64) -> Result<(), TrainError> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFiniteLoss { what, epoch })
    }
}

fn step(net: &mut Mlp, mut grads: Gradients, lr: f64, max_norm: f64) -> Result<(), TrainError> {
    if max_norm > 0.0 {
        grads.clip_norm(max_norm);
    }
    net.adam_step(&grads, lr)?;
    Ok(())
}
