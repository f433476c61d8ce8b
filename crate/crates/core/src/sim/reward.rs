use serde::{Deserialize, Serialize};

/// Dense reward weights for progress, speed, yaw change and steering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub distance: f64,
    pub speed: f64,
    pub yaw: f64,
    pub steering: f64,
    pub success: f64,
    pub departure: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            distance: 1.0,
            speed: 0.1,
            yaw: -0.4,
            steering: -0.4,
            success: 10.0,
            departure: -5.0,
        }
    }
}

/// The logged components of one step's reward.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardParts {
    /// Route progress this step, metres.
    pub distance: f64,
    /// `v / v_max`.
    pub speed: f64,
    /// Absolute heading change this step, radians.
    pub yaw: f64,
    /// Absolute steering angle over the steering limit.
    pub steering: f64,
    /// Sparse terminal reward, unweighted.
    pub terminal: f64,
}

pub fn compute_reward(parts: &RewardParts, w: &RewardWeights) -> f64 {
    w.distance * parts.distance
        + w.speed * parts.speed
        + w.yaw * parts.yaw
        + w.steering * parts.steering
        + parts.terminal
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_and_speed_only() {
        let parts = RewardParts {
            distance: 0.5,
            speed: (40.0 / 3.6) / (80.0 / 3.6),
            ..RewardParts::default()
        };
        assert!((compute_reward(&parts, &RewardWeights::default()) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn terminal_rewards_are_unweighted() {
        let w = RewardWeights::default();
        let success = RewardParts {
            terminal: w.success,
            ..RewardParts::default()
        };
        let departure = RewardParts {
            terminal: w.departure,
            ..RewardParts::default()
        };
        assert_eq!(compute_reward(&success, &w), 10.0);
        assert_eq!(compute_reward(&departure, &w), -5.0);
    }

    #[test]
    fn penalties_subtract() {
        let parts = RewardParts {
            yaw: 0.1,
            steering: 0.5,
            ..RewardParts::default()
        };
        assert!((compute_reward(&parts, &RewardWeights::default()) - (-0.04 - 0.2)).abs() < 1e-15);
    }
}
