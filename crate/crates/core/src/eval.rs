//! Frozen-policy evaluation and trajectory export.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;

use crate::agent::Agent;
use crate::nn::NnError;
use crate::rollout::EnvPool;
use crate::seeding::rng_for;
use crate::sim::{Env, Observation, RoadMap, SimError, Status};

/// Anything that picks an action from the current environment state.
pub trait Controller {
    fn action(&self, env: &Env, obs: &Observation) -> Result<[f64; 2], NnError>;
}

/// Agents are evaluated on their mean action.
impl Controller for Agent {
    fn action(&self, _env: &Env, obs: &Observation) -> Result<[f64; 2], NnError> {
        self.mean_action(obs)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("evaluation needs at least one map")]
    NoMaps,
    #[error("group size and repeat count must be positive")]
    EmptyProtocol,
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub group: usize,
    pub map: usize,
    pub steps: usize,
    pub reward: f64,
    pub cost: f64,
    pub feasible_steps: usize,
    pub status: Status,
}

impl EpisodeRecord {
    pub fn success(&self) -> bool {
        self.status == Status::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub success_rate: MeanStd,
    pub episode_cost: MeanStd,
    pub episode_reward: MeanStd,
    pub feasible_rate: MeanStd,
    pub group_size: usize,
    pub repeats: usize,
    pub episodes: Vec<EpisodeRecord>,
}

impl EvalSummary {
    /// Aggregates per-episode records: each metric is computed per group and
    /// the mean and standard deviation are taken over the group values.
    pub fn from_records(episodes: Vec<EpisodeRecord>, group_size: usize, repeats: usize) -> Self {
        let mut success = Vec::with_capacity(repeats);
        let mut cost = Vec::with_capacity(repeats);
        let mut reward = Vec::with_capacity(repeats);
        let mut feasible = Vec::with_capacity(repeats);
        for g in 0..repeats {
            let eps: Vec<&EpisodeRecord> = episodes.iter().filter(|e| e.group == g).collect();
            let n = eps.len() as f64;
            success.push(eps.iter().filter(|e| e.success()).count() as f64 / n);
            cost.push(eps.iter().map(|e| e.cost).sum::<f64>() / n);
            reward.push(eps.iter().map(|e| e.reward).sum::<f64>() / n);
            let steps: usize = eps.iter().map(|e| e.steps).sum();
            let ok: usize = eps.iter().map(|e| e.feasible_steps).sum();
            feasible.push(ok as f64 / steps.max(1) as f64);
        }
        Self {
            success_rate: MeanStd::of(&success),
            episode_cost: MeanStd::of(&cost),
            episode_reward: MeanStd::of(&reward),
            feasible_rate: MeanStd::of(&feasible),
            group_size,
            repeats,
            episodes,
        }
    }

    pub fn table(&self) -> String {
        format!(
            "episodes       {} ({} groups of {})\n\
             success rate   {}\n\
             episode cost   {}\n\
             episode reward {}\n\
             feasible rate  {}\n",
            self.episodes.len(),
            self.repeats,
            self.group_size,
            self.success_rate,
            self.episode_cost,
            self.episode_reward,
            self.feasible_rate
        )
    }

    /// One row per metric: `metric,mean,std`.
    pub fn write_csv(&self, path: &Path) -> Result<(), EvalError> {
        let csv_err = |source| EvalError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["metric", "mean", "std"]).map_err(csv_err)?;
        for (name, m) in [
            ("success_rate", self.success_rate),
            ("episode_cost", self.episode_cost),
            ("episode_reward", self.episode_reward),
            ("feasible_rate", self.feasible_rate),
        ] {
            w.write_record([name.to_string(), m.mean.to_string(), m.std.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Runs `repeats` groups of `group_size` episodes. Map choice and traffic of
/// every episode derive from `seed`, so a fixed controller and seed always
/// produce the same summary.
pub fn evaluate<C: Controller + ?Sized>(
    controller: &C,
    pool: &EnvPool,
    group_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalSummary, EvalError> {
    if pool.maps.is_empty() {
        return Err(EvalError::NoMaps);
    }
    if group_size == 0 || repeats == 0 {
        return Err(EvalError::EmptyProtocol);
    }
    let mut rng = rng_for(seed, &[]);
    let mut records = Vec::with_capacity(group_size * repeats);
    let mut env: Option<Env> = None;
    for group in 0..repeats {
        for _ in 0..group_size {
            let map = rng.random_range(0..pool.maps.len());
            let traffic_seed: u64 = rng.random();
            let env = match env.as_mut() {
                Some(e) => {
                    e.reset_on(Arc::clone(&pool.maps[map]), traffic_seed);
                    e
                }
                None => env.insert(Env::new(
                    Arc::clone(&pool.maps[map]),
                    pool.env.clone(),
                    pool.traffic.clone(),
                    traffic_seed,
                )),
            };
            let mut rec = EpisodeRecord {
                group,
                map,
                steps: 0,
                reward: 0.0,
                cost: 0.0,
                feasible_steps: 0,
                status: Status::Running,
            };
            let mut obs = env.observe();
            while rec.status == Status::Running {
                let action = controller.action(env, &obs)?;
                let out = env.step(action)?;
                rec.steps += 1;
                rec.reward += out.reward;
                rec.cost += out.cost as f64;
                rec.feasible_steps += usize::from(out.feasible);
                rec.status = out.status;
                obs = out.observation;
            }
            records.push(rec);
        }
    }
    Ok(EvalSummary::from_records(records, group_size, repeats))
}

/// Writes one CSV per episode (`episode_000.csv`, ...) with per-step pose,
/// speed, actions, reward, cost and collision/departure flags. Returns the
/// written paths.
#[allow(clippy::too_many_arguments)]
pub fn export_trajectories<C: Controller + ?Sized>(
    controller: &C,
    map: Arc<RoadMap>,
    pool: &EnvPool,
    episodes: usize,
    seed: u64,
    dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut rng = rng_for(seed, &[]);
    let mut env = Env::new(map.clone(), pool.env.clone(), pool.traffic.clone(), 0);
    let mut paths = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let path = dir.join(format!("episode_{k:03}.csv"));
        let csv_err = |source| EvalError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record([
            "step", "x", "y", "heading", "speed", "steer_cmd", "accel_cmd", "reward", "cost", "collision",
            "departure", "status",
        ])
        .map_err(csv_err)?;
        let mut obs = env.reset_on(map.clone(), rng.random());
        let mut step = 0usize;
        loop {
            let action = controller.action(&env, &obs)?;
            let out = env.step(action)?;
            step += 1;
            let ego = &env.world().ego;
            w.write_record([
                step.to_string(),
                ego.pose.x.to_string(),
                ego.pose.y.to_string(),
                ego.pose.heading.to_string(),
                ego.speed.to_string(),
                action[0].to_string(),
                action[1].to_string(),
                out.reward.to_string(),
                out.cost.to_string(),
                u8::from(out.info.collision).to_string(),
                u8::from(out.info.departure).to_string(),
                out.status.as_str().to_string(),
            ])
            .map_err(csv_err)?;
            obs = out.observation;
            if out.status != Status::Running {
                break;
            }
        }
        w.flush().map_err(|source| EvalError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{EnvConfig, Segment, TrafficConfig};

    /// Steers back toward the centre of the middle lane at a moderate speed.
    struct LaneKeeper;

    impl Controller for LaneKeeper {
        fn action(&self, env: &Env, _obs: &Observation) -> Result<[f64; 2], NnError> {
            let ego = &env.world().ego;
            let heading_err = crate::sim::geometry::wrap_angle(ego.pose.heading - ego.route_heading);
            let steer = (-0.3 * ego.lateral - 1.5 * heading_err).clamp(-1.0, 1.0);
            let accel = if ego.speed < 8.0 { 0.5 } else { 0.0 };
            Ok([steer, accel])
        }
    }

    struct Swerve;

    impl Controller for Swerve {
        fn action(&self, _env: &Env, _obs: &Observation) -> Result<[f64; 2], NnError> {
            Ok([1.0, 1.0])
        }
    }

    fn empty_pool() -> EnvPool {
        let map = RoadMap::from_segments(
            &[
                Segment::Straight { length: 80.0 },
                Segment::Arc {
                    radius: 60.0,
                    sweep: 0.6,
                },
                Segment::Straight { length: 80.0 },
            ],
            3,
            3.5,
        )
        .unwrap();
        EnvPool {
            maps: vec![Arc::new(map)],
            env: EnvConfig::default(),
            traffic: TrafficConfig {
                density: 0.0,
                accident_prob: 0.0,
                ..TrafficConfig::default()
            },
            workers: 1,
        }
    }

    #[test]
    fn lane_keeper_succeeds_on_empty_road() {
        let s = evaluate(&LaneKeeper, &empty_pool(), 3, 2, 1).unwrap();
        assert_eq!(s.success_rate.mean, 1.0);
        assert_eq!(s.episode_cost.mean, 0.0);
        assert_eq!(s.episodes.len(), 6);
    }

    #[test]
    fn swerving_never_succeeds() {
        let s = evaluate(&Swerve, &empty_pool(), 4, 1, 1).unwrap();
        assert_eq!(s.success_rate.mean, 0.0);
        assert!(s.episodes.iter().all(|e| e.cost >= 1.0 && e.status == Status::LaneDeparture));
    }

    #[test]
    fn summary_is_recomputable() {
        let s = evaluate(&Swerve, &empty_pool(), 3, 4, 2).unwrap();
        let again = EvalSummary::from_records(s.episodes.clone(), 3, 4);
        assert_eq!(s, again);
        assert_eq!(s.success_rate.std, 0.0);
    }

    #[test]
    fn export_row_count_matches_steps() {
        let dir = tempfile::tempdir().unwrap();
        let pool = empty_pool();
        let paths = export_trajectories(&Swerve, pool.maps[0].clone(), &pool, 2, 5, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let rows = text.lines().count();
        let last = text.lines().last().unwrap();
        let steps: usize = last.split(',').next().unwrap().parse().unwrap();
        assert_eq!(rows, steps + 1);
        assert!(last.ends_with("lane_departure"));
    }
}
