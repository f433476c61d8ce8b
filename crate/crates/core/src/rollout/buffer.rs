use crate::sim::{Status, ACTION_DIM, OBS_DIM};

use super::gae::{compute_gae, Boundary};
use super::RolloutError;

/// Why an episode stopped at a given step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    Continue,
    Success,
    Departure,
    /// The environment's step limit.
    MaxSteps,
    /// Cut short because the buffer was full.
    Cut,
}

impl EpisodeEnd {
    pub fn from_status(status: Status) -> Self {
        match status {
            Status::Running => EpisodeEnd::Continue,
            Status::Success => EpisodeEnd::Success,
            Status::LaneDeparture => EpisodeEnd::Departure,
            Status::MaxSteps => EpisodeEnd::MaxSteps,
        }
    }

    pub fn ends_episode(self) -> bool {
        self != EpisodeEnd::Continue
    }

    /// Ends that carry a bootstrap value.
    pub fn is_truncation(self) -> bool {
        matches!(self, EpisodeEnd::MaxSteps | EpisodeEnd::Cut)
    }

    /// Whether the episode ran to a natural end (not cut by the buffer).
    pub fn is_complete(self) -> bool {
        matches!(self, EpisodeEnd::Success | EpisodeEnd::Departure | EpisodeEnd::MaxSteps)
    }
}

/// Per-episode aggregates of a buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub start: usize,
    pub len: usize,
    pub reward: f64,
    pub cost: f64,
    pub discounted_cost: f64,
    pub end: EpisodeEnd,
}

/// One sampling epoch of on-policy experience, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    /// `len x OBS_DIM`.
    pub observations: Vec<f64>,
    /// Pre-clip Gaussian samples, `len x ACTION_DIM`.
    pub raw_actions: Vec<f64>,
    /// Clipped actions as executed.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub values: Vec<f64>,
    pub cost_values: Vec<f64>,
    /// Feasibility of the state reached by each step.
    pub feasible: Vec<bool>,
    pub episode_start: Vec<bool>,
    pub ends: Vec<EpisodeEnd>,
    pub bootstrap_values: Vec<f64>,
    pub bootstrap_cost_values: Vec<f64>,

    pub advantages: Vec<f64>,
    pub cost_advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub cost_returns: Vec<f64>,
}

/// One recorded transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub observation: &'a [f64],
    pub raw_action: &'a [f64],
    pub action: &'a [f64],
    pub log_prob: f64,
    pub reward: f64,
    pub cost: f64,
    pub value: f64,
    pub cost_value: f64,
    pub feasible: bool,
    pub episode_start: bool,
}

impl RolloutBuffer {
    pub fn with_capacity(steps: usize) -> Self {
        Self {
            observations: Vec::with_capacity(steps * OBS_DIM),
            raw_actions: Vec::with_capacity(steps * ACTION_DIM),
            actions: Vec::with_capacity(steps * ACTION_DIM),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, t: Transition<'_>) {
        debug_assert_eq!(t.observation.len(), OBS_DIM);
        self.observations.extend_from_slice(t.observation);
        self.raw_actions.extend_from_slice(t.raw_action);
        self.actions.extend_from_slice(t.action);
        self.log_probs.push(t.log_prob);
        self.rewards.push(t.reward);
        self.costs.push(t.cost);
        self.values.push(t.value);
        self.cost_values.push(t.cost_value);
        self.feasible.push(t.feasible);
        self.episode_start.push(t.episode_start);
        self.ends.push(EpisodeEnd::Continue);
        self.bootstrap_values.push(0.0);
        self.bootstrap_cost_values.push(0.0);
    }

    /// Marks the most recent step as the end of its episode.
    pub fn end_episode(&mut self, end: EpisodeEnd, bootstrap: (f64, f64)) {
        let last = self.len() - 1;
        self.ends[last] = end;
        if end.is_truncation() {
            self.bootstrap_values[last] = bootstrap.0;
            self.bootstrap_cost_values[last] = bootstrap.1;
        }
    }

    /// Appends another buffer (used to merge worker sub-buffers in order).
    pub fn extend(&mut self, other: RolloutBuffer) {
        self.observations.extend(other.observations);
        self.raw_actions.extend(other.raw_actions);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.rewards.extend(other.rewards);
        self.costs.extend(other.costs);
        self.values.extend(other.values);
        self.cost_values.extend(other.cost_values);
        self.feasible.extend(other.feasible);
        self.episode_start.extend(other.episode_start);
        self.ends.extend(other.ends);
        self.bootstrap_values.extend(other.bootstrap_values);
        self.bootstrap_cost_values.extend(other.bootstrap_cost_values);
        self.advantages.extend(other.advantages);
        self.cost_advantages.extend(other.cost_advantages);
        self.returns.extend(other.returns);
        self.cost_returns.extend(other.cost_returns);
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * OBS_DIM..(i + 1) * OBS_DIM]
    }

    /// `[start, end)` index ranges of the episodes, in order.
    pub fn episode_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, end) in self.ends.iter().enumerate() {
            if end.ends_episode() {
                out.push((start, i + 1));
                start = i + 1;
            }
        }
        if start < self.len() {
            out.push((start, self.len()));
        }
        out
    }

    pub fn episodes(&self, gamma: f64) -> Vec<EpisodeSummary> {
        self.episode_ranges()
            .into_iter()
            .map(|(s, e)| {
                let mut discount = 1.0;
                let mut discounted_cost = 0.0;
                for c in &self.costs[s..e] {
                    discounted_cost += discount * c;
                    discount *= gamma;
                }
                EpisodeSummary {
                    start: s,
                    len: e - s,
                    reward: self.rewards[s..e].iter().sum(),
                    cost: self.costs[s..e].iter().sum(),
                    discounted_cost,
                    end: self.ends[e - 1],
                }
            })
            .collect()
    }

    pub fn feasible_rate(&self) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        self.feasible.iter().filter(|&&f| f).count() as f64 / self.len() as f64
    }

    fn boundaries(&self, bootstrap: &[f64]) -> Vec<Boundary> {
        self.ends
            .iter()
            .zip(bootstrap)
            .map(|(end, &b)| match end {
                EpisodeEnd::Continue => Boundary::Continue,
                EpisodeEnd::Success | EpisodeEnd::Departure => Boundary::Terminal,
                EpisodeEnd::MaxSteps | EpisodeEnd::Cut => Boundary::Truncated { bootstrap: b },
            })
            .collect()
    }

    /// Fills advantages and return targets for the reward and cost critics.
    /// Reward advantages are standardised over the buffer; cost advantages
    /// are left in cost units.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), RolloutError> {
        let (adv, ret) = compute_gae(
            &self.rewards,
            &self.values,
            &self.boundaries(&self.bootstrap_values),
            gamma,
            lambda,
        )?;
        let (cadv, cret) = compute_gae(
            &self.costs,
            &self.cost_values,
            &self.boundaries(&self.bootstrap_cost_values),
            gamma,
            lambda,
        )?;
        self.advantages = normalize(&adv);
        self.returns = ret;
        self.cost_advantages = cadv;
        self.cost_returns = cret;
        if let Some(i) = self
            .advantages
            .iter()
            .chain(&self.cost_advantages)
            .position(|a| !a.is_finite())
        {
            return Err(RolloutError::NonFinite(i % self.len().max(1)));
        }
        Ok(())
    }
}

/// Zero-mean, unit-variance rescaling (population variance, with a small
/// floor on the standard deviation).
pub fn normalize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    xs.iter().map(|x| (x - mean) / std).collect()
}
