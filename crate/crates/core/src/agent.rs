//! The four networks of the learner bundled together.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{self, Activation, GaussianAction, Mlp, NnError};
use crate::sim::{ACTION_DIM, OBS_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub hidden_size: usize,
    /// Trajectory window length `n`; windows hold `n + 1` observations.
    pub window: usize,
    pub init_log_std: f64,
    /// Output-layer gain of the policy mean at initialisation.
    pub policy_output_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 2,
            hidden_size: 64,
            window: 5,
            init_log_std: 0.5f64.ln(),
            policy_output_gain: 0.01,
        }
    }
}

impl NetworkConfig {
    pub fn window_input_dim(&self) -> usize {
        (self.window + 1) * OBS_DIM
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        std::iter::once(input)
            .chain(std::iter::repeat_n(self.hidden_size, self.hidden_layers))
            .chain(std::iter::once(output))
            .collect()
    }
}

/// Policy, reward critic, cost critic and validation network.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub policy: Mlp,
    pub value: Mlp,
    pub cost_value: Mlp,
    pub validation: Mlp,
}

impl Agent {
    pub fn new(cfg: &NetworkConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = Mlp::new(
            &cfg.sizes(OBS_DIM, ACTION_DIM),
            Activation::Tanh,
            cfg.policy_output_gain,
            &mut rng,
        )
        .with_log_std(cfg.init_log_std);
        let value = Mlp::new(&cfg.sizes(OBS_DIM, 1), Activation::Tanh, 1.0, &mut rng);
        let cost_value = Mlp::new(&cfg.sizes(OBS_DIM, 1), Activation::Tanh, 1.0, &mut rng);
        let validation = Mlp::new(
            &cfg.sizes(cfg.window_input_dim(), 1),
            Activation::Tanh,
            1.0,
            &mut rng,
        );
        Self {
            policy,
            value,
            cost_value,
            validation,
        }
    }

    pub fn log_std(&self) -> &[f64] {
        self.policy
            .log_std
            .as_deref()
            .expect("policy network carries a log-std head")
    }

    /// Samples a stochastic action.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<GaussianAction, NnError> {
        let mean = self.policy.forward(obs)?;
        Ok(nn::sample(&mean, self.log_std(), rng))
    }

    /// The distribution mean clipped to the action box.
    pub fn mean_action(&self, obs: &[f64]) -> Result<[f64; 2], NnError> {
        let mean = self.policy.forward(obs)?;
        Ok([mean[0].clamp(-1.0, 1.0), mean[1].clamp(-1.0, 1.0)])
    }

    /// `(V(s), V_c(s))`.
    pub fn values(&self, obs: &[f64]) -> Result<(f64, f64), NnError> {
        Ok((self.value.forward(obs)?[0], self.cost_value.forward(obs)?[0]))
    }

    pub fn networks(&self) -> [(&'static str, &Mlp); 4] {
        [
            ("policy", &self.policy),
            ("value", &self.value),
            ("cost_value", &self.cost_value),
            ("validation", &self.validation),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_config() {
        let agent = Agent::new(&NetworkConfig::default(), 0);
        assert_eq!(agent.policy.sizes(), vec![49, 64, 64, 2]);
        assert_eq!(agent.value.sizes(), vec![49, 64, 64, 1]);
        assert_eq!(agent.cost_value.sizes(), vec![49, 64, 64, 1]);
        assert_eq!(agent.validation.sizes(), vec![294, 64, 64, 1]);
        assert_eq!(agent.log_std(), &[0.5f64.ln(); 2]);
    }

    #[test]
    fn identical_seeds_identical_agents() {
        assert_eq!(Agent::new(&NetworkConfig::default(), 4), Agent::new(&NetworkConfig::default(), 4));
        assert_ne!(Agent::new(&NetworkConfig::default(), 4), Agent::new(&NetworkConfig::default(), 5));
    }
}
