//! On-policy experience collection, advantage estimation and extraction of
//! labelled trajectory windows.

mod buffer;
mod gae;
mod window;

pub use buffer::{normalize, EpisodeEnd, EpisodeSummary, RolloutBuffer, Transition};
pub use gae::{compute_gae, Boundary};
pub use window::{extract_windows, TrajectoryWindow};

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::agent::Agent;
use crate::nn::{self, NnError};
use crate::seeding::rng_for;
use crate::sim::{Env, EnvConfig, RoadMap, SimError, TrafficConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RolloutError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("inconsistent episode boundaries: {0}")]
    Boundaries(String),
    #[error("non-finite advantage at step {0}")]
    NonFinite(usize),
    #[error("environment pool has no maps")]
    NoMaps,
}

/// The set of maps and environment constants rollouts draw episodes from.
#[derive(Debug, Clone)]
pub struct EnvPool {
    pub maps: Vec<Arc<RoadMap>>,
    pub env: EnvConfig,
    pub traffic: TrafficConfig,
    /// Number of independent sampling workers.
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from the Gaussian policy.
    Sample,
    /// Execute the distribution mean.
    Mean,
}

/// Runs episodes until `total_steps` transitions are stored. Each worker
/// fills its share from a private RNG derived from `seed`; the final
/// episode of every worker is cut and flagged for bootstrapping. Worker
/// buffers are concatenated in worker order.
pub fn collect_rollout(
    pool: &EnvPool,
    agent: &Agent,
    total_steps: usize,
    seed: u64,
    mode: ActionMode,
) -> Result<RolloutBuffer, RolloutError> {
    if pool.maps.is_empty() {
        return Err(RolloutError::NoMaps);
    }
    let workers = pool.workers.clamp(1, total_steps.max(1));
    let quota = |w: usize| total_steps / workers + usize::from(w < total_steps % workers);
    let parts: Vec<Result<RolloutBuffer, RolloutError>> = if workers == 1 {
        vec![collect_worker(pool, agent, quota(0), seed, 0, mode)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| scope.spawn(move || collect_worker(pool, agent, quota(w), seed, w as u64, mode)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("rollout worker panicked"))
                .collect()
        })
    };
    let mut buffer = RolloutBuffer::with_capacity(total_steps);
    for part in parts {
        buffer.extend(part?);
    }
    Ok(buffer)
}

fn collect_worker(
    pool: &EnvPool,
    agent: &Agent,
    steps: usize,
    seed: u64,
    worker: u64,
    mode: ActionMode,
) -> Result<RolloutBuffer, RolloutError> {
    let mut rng = rng_for(seed, &[worker]);
    let mut buffer = RolloutBuffer::with_capacity(steps);
    let mut env: Option<Env> = None;
    let mut fresh = true;
    while buffer.len() < steps {
        if fresh {
            let map = Arc::clone(&pool.maps[rng.random_range(0..pool.maps.len())]);
            let traffic_seed: u64 = rng.random();
            match env.as_mut() {
                Some(e) => {
                    e.reset_on(map, traffic_seed);
                }
                None => env = Some(Env::new(map, pool.env.clone(), pool.traffic.clone(), traffic_seed)),
            }
        }
        let env = env.as_mut().expect("initialised above");
        let obs = env.observe();
        let action = match mode {
            ActionMode::Sample => agent.act(&obs, &mut rng)?,
            ActionMode::Mean => {
                let mean = agent.policy.forward(&obs)?;
                nn::sample_with_noise(&mean, agent.log_std(), &[0.0; 2])
            }
        };
        let (value, cost_value) = agent.values(&obs)?;
        let out = env.step([action.action[0], action.action[1]])?;
        buffer.push(Transition {
            observation: &obs,
            raw_action: &action.raw,
            action: &action.action,
            log_prob: action.log_prob,
            reward: out.reward,
            cost: out.cost as f64,
            value,
            cost_value,
            feasible: out.feasible,
            episode_start: fresh,
        });
        fresh = false;
        let end = EpisodeEnd::from_status(out.status);
        if end.ends_episode() || buffer.len() == steps {
            let end = if end.ends_episode() { end } else { EpisodeEnd::Cut };
            let bootstrap = if end.is_truncation() {
                agent.values(&out.observation)?
            } else {
                (0.0, 0.0)
            };
            buffer.end_episode(end, bootstrap);
            fresh = true;
        }
    }
    Ok(buffer)
}
