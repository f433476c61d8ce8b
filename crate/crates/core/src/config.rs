//! Run configuration.
//!
//! A run is described by one TOML file with the sections `[run]`,
//! `[network]`, `[train]`, `[lagrange]`, `[env]` (with `[env.reward]`),
//! `[traffic]`, `[maps]` and `[eval]`. Every key is optional and unknown keys
//! are rejected. An empty file gives the default configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, NetworkConfig};
use crate::rollout::EnvPool;
use crate::seeding::{derive_seed, stream};
use crate::sim::{build_map, EnvConfig, MapSpec, RoadMap, SimError, TrafficConfig};
use crate::train::{Ablation, LagrangeConfig, TrainConfig, Trainer};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub mode: Ablation,
    /// Environment steps over the whole run.
    pub total_steps: u64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: Ablation::Lstc,
            total_steps: 1_000_000,
            checkpoint_every: 10,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Which maps training and evaluation draw from. Random maps are generated
/// from consecutive seeds; the training and evaluation seed ranges must not
/// overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsSection {
    pub train_count: u64,
    pub train_seed_start: u64,
    pub eval_count: u64,
    pub eval_seed_start: u64,
    pub spec: MapSpec,
}

impl Default for MapsSection {
    fn default() -> Self {
        Self {
            train_count: 100,
            train_seed_start: 0,
            eval_count: 20,
            eval_seed_start: 1_000_000,
            spec: MapSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub group_size: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Episodes written by `export-traj`.
    pub export_episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            group_size: 20,
            repeats: 10,
            seed: 7,
            export_episodes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub lagrange: LagrangeConfig,
    pub env: EnvConfig,
    pub traffic: TrafficConfig,
    pub maps: MapsSection,
    pub eval: EvalSection,
}

impl RunConfig {
    /// Parses and validates a config. `origin` names the source in errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.train;
        let mut problems = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        need(t.batch_size >= 1, "train.batch_size must be at least 1");
        need(t.minibatch_size >= 1, "train.minibatch_size must be at least 1");
        need(t.clip > 0.0 && t.clip < 1.0, "train.clip must lie in (0, 1)");
        need((0.0..=1.0).contains(&t.gamma), "train.gamma must lie in [0, 1]");
        need((0.0..=1.0).contains(&t.gae_lambda), "train.gae_lambda must lie in [0, 1]");
        need(t.max_grad_norm >= 0.0, "train.max_grad_norm must be non-negative");
        need(t.workers >= 1, "train.workers must be at least 1");
        for (name, lr) in [
            ("lr_policy", t.lr_policy),
            ("lr_value", t.lr_value),
            ("lr_cost_value", t.lr_cost_value),
            ("lr_validation", t.lr_validation),
        ] {
            need(lr.is_finite() && lr > 0.0, &format!("train.{name} must be positive"));
        }
        let l = &self.lagrange;
        need(
            l.lambda_long >= 0.0 && l.lambda_short >= 0.0,
            "lagrange multipliers must be non-negative",
        );
        need(l.lambda_max > 0.0, "lagrange.lambda_max must be positive");
        need(
            l.alpha_long >= 0.0 && l.alpha_short >= 0.0 && l.alpha_short < 1.0,
            "lagrange step sizes must be non-negative and alpha_short below 1",
        );
        need(self.network.window >= 1, "network.window must be at least 1");
        need(self.network.hidden_size >= 1, "network.hidden_size must be at least 1");
        need(self.env.lane_count >= 1, "env.lane_count must be at least 1");
        need(self.env.lidar_rays == 30, "env.lidar_rays is fixed at 30 by the observation layout");
        need(self.env.dt > 0.0, "env.dt must be positive");
        need(self.env.max_steps >= 1, "env.max_steps must be at least 1");
        need(self.eval.group_size >= 1 && self.eval.repeats >= 1, "eval.group_size and eval.repeats must be at least 1");
        let m = &self.maps;
        need(m.train_count >= 1 && m.eval_count >= 1, "maps.train_count and maps.eval_count must be at least 1");
        let train = m.train_seed_start..m.train_seed_start.saturating_add(m.train_count);
        let eval = m.eval_seed_start..m.eval_seed_start.saturating_add(m.eval_count);
        need(
            matches!(m.spec, MapSpec::Fixed { .. }) || train.end <= eval.start || eval.end <= train.start,
            "training and evaluation map seed ranges overlap",
        );
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }

    fn maps(&self, start: u64, count: u64) -> Result<Vec<Arc<RoadMap>>, ConfigError> {
        let count = if matches!(self.maps.spec, MapSpec::Fixed { .. }) { 1 } else { count };
        (start..start + count)
            .map(|s| {
                build_map(&self.maps.spec, self.env.lane_count, self.env.lane_width, s)
                    .map(Arc::new)
                    .map_err(ConfigError::from)
            })
            .collect()
    }

    fn pool(&self, maps: Vec<Arc<RoadMap>>) -> EnvPool {
        EnvPool {
            maps,
            env: self.env.clone(),
            traffic: self.traffic.clone(),
            workers: self.train.workers,
        }
    }

    pub fn train_pool(&self) -> Result<EnvPool, ConfigError> {
        Ok(self.pool(self.maps(self.maps.train_seed_start, self.maps.train_count)?))
    }

    pub fn eval_pool(&self) -> Result<EnvPool, ConfigError> {
        Ok(self.pool(self.maps(self.maps.eval_seed_start, self.maps.eval_count)?))
    }

    /// A fresh learner for this configuration.
    pub fn trainer(&self) -> Trainer {
        let seed = self.run.seed;
        let agent = Agent::new(&self.network, derive_seed(seed, &[stream::AGENT_INIT]));
        Trainer::new(
            agent,
            &self.lagrange,
            self.train.clone(),
            self.run.mode,
            self.network.window,
            seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Segment;
    use crate::train::MultiplierMode;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("", "empty").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.train.gamma, 0.99);
        assert_eq!(cfg.train.batch_size, 20_000);
        assert_eq!(cfg.train.lr_policy, 3e-4);
        assert_eq!(cfg.lagrange.lambda_short, 0.5);
        assert_eq!(cfg.lagrange.lambda_long, 0.1);
        assert_eq!(cfg.lagrange.alpha_short, 0.01);
        assert_eq!(cfg.lagrange.alpha_long, 0.025);
        assert_eq!(cfg.network.window, 5);
        assert_eq!((cfg.network.hidden_layers, cfg.network.hidden_size), (2, 64));
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.run.mode = Ablation::PpoLag;
        cfg.lagrange.mode = MultiplierMode::Gated;
        cfg.train.lr_value = 1.234_567_890_123e-3;
        cfg.maps.spec = MapSpec::Fixed {
            segments: vec![
                Segment::Straight { length: 150.0 },
                Segment::Arc {
                    radius: 100.0,
                    sweep: 0.5,
                },
            ],
        };
        let text = cfg.to_toml();
        assert_eq!(RunConfig::parse(&text, "rt").unwrap(), cfg);
        let random = RunConfig::default();
        assert_eq!(RunConfig::parse(&random.to_toml(), "rt").unwrap(), random);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("[train]\ngamma = 0.9\nbogus = 1\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn overlapping_seed_ranges_rejected() {
        let err = RunConfig::parse("[maps]\ntrain_count = 10\neval_seed_start = 5\n", "cfg").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn mode_names() {
        let cfg = RunConfig::parse("[run]\nmode = \"ppo-lag\"\n", "cfg").unwrap();
        assert_eq!(cfg.run.mode, Ablation::PpoLag);
        assert!(RunConfig::parse("[run]\nmode = \"sac\"\n", "cfg").is_err());
    }
}
