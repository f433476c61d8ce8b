use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierMode {
    /// Projected dual ascent every epoch; the short-term multiplier decays
    /// while no window violates its constraint.
    Unconditional,
    /// Increase a multiplier only while its constraint is violated; never
    /// decrease.
    Gated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagrangeConfig {
    pub lambda_long: f64,
    pub lambda_short: f64,
    pub alpha_long: f64,
    pub alpha_short: f64,
    /// Threshold on the expected discounted episode cost.
    pub cost_threshold: f64,
    pub lambda_max: f64,
    pub mode: MultiplierMode,
}

impl Default for LagrangeConfig {
    fn default() -> Self {
        Self {
            lambda_long: 0.1,
            lambda_short: 0.5,
            alpha_long: 0.025,
            alpha_short: 0.01,
            cost_threshold: 1.0,
            lambda_max: 100.0,
            mode: MultiplierMode::Unconditional,
        }
    }
}

/// Epoch statistics the multipliers respond to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintStats {
    /// Mean discounted episode cost.
    pub discounted_cost: f64,
    /// Mean over windows of `max(B(tau), 0)`.
    pub positive_validation: f64,
}

/// The long- and short-term multipliers with their update rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeState {
    pub lambda_long: f64,
    pub lambda_short: f64,
    pub alpha_long: f64,
    pub alpha_short: f64,
    pub cost_threshold: f64,
    pub lambda_max: f64,
    pub mode: MultiplierMode,
}

impl LagrangeState {
    pub fn new(cfg: &LagrangeConfig) -> Self {
        Self {
            lambda_long: cfg.lambda_long,
            lambda_short: cfg.lambda_short,
            alpha_long: cfg.alpha_long,
            alpha_short: cfg.alpha_short,
            cost_threshold: cfg.cost_threshold,
            lambda_max: cfg.lambda_max,
            mode: cfg.mode,
        }
    }

    /// One dual step. Both multipliers stay in `[0, lambda_max]`.
    pub fn update(&mut self, stats: ConstraintStats) {
        let violation = stats.discounted_cost - self.cost_threshold;
        let b_pos = stats.positive_validation.max(0.0);
        match self.mode {
            MultiplierMode::Unconditional => {
                self.lambda_long = (self.lambda_long + self.alpha_long * violation).clamp(0.0, self.lambda_max);
                self.lambda_short = if b_pos > 0.0 {
                    (self.lambda_short + self.alpha_short * b_pos).clamp(0.0, self.lambda_max)
                } else {
                    (self.lambda_short * (1.0 - self.alpha_short)).clamp(0.0, self.lambda_max)
                };
            }
            MultiplierMode::Gated => {
                if violation > 0.0 {
                    self.lambda_long = (self.lambda_long + self.alpha_long * violation).min(self.lambda_max);
                }
                if b_pos > 0.0 {
                    self.lambda_short = (self.lambda_short + self.alpha_short * b_pos).min(self.lambda_max);
                }
            }
        }
    }
}

/// Functional form of [`LagrangeState::update`].
pub fn update_multipliers(state: &LagrangeState, stats: ConstraintStats) -> LagrangeState {
    let mut next = state.clone();
    next.update(stats);
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> LagrangeState {
        LagrangeState::new(&LagrangeConfig::default())
    }

    #[test]
    fn long_term_ascent_step() {
        let s = update_multipliers(
            &state(),
            ConstraintStats {
                discounted_cost: 3.0,
                positive_validation: 0.0,
            },
        );
        assert!((s.lambda_long - 0.15).abs() < 1e-15);
    }

    #[test]
    fn satisfied_constraint_drives_to_zero() {
        let mut s = state();
        let mut prev = s.lambda_long;
        for _ in 0..50 {
            s.update(ConstraintStats {
                discounted_cost: 0.0,
                positive_validation: 0.0,
            });
            assert!(s.lambda_long <= prev && s.lambda_long >= 0.0);
            prev = s.lambda_long;
        }
        assert_eq!(s.lambda_long, 0.0);
    }

    #[test]
    fn gated_mode_holds_without_violation() {
        let mut s = LagrangeState {
            mode: MultiplierMode::Gated,
            ..state()
        };
        s.update(ConstraintStats {
            discounted_cost: 0.0,
            positive_validation: 0.0,
        });
        assert_eq!((s.lambda_long, s.lambda_short), (0.1, 0.5));
        s.update(ConstraintStats {
            discounted_cost: 0.0,
            positive_validation: 2.0,
        });
        assert!((s.lambda_short - 0.52).abs() < 1e-15);
    }

    #[test]
    fn short_term_decays_when_clean() {
        let mut s = state();
        s.update(ConstraintStats::default());
        assert!((s.lambda_short - 0.5 * 0.99).abs() < 1e-15);
    }

    #[test]
    fn capped_at_lambda_max() {
        let mut s = LagrangeState {
            lambda_max: 1.0,
            ..state()
        };
        for _ in 0..100 {
            s.update(ConstraintStats {
                discounted_cost: 50.0,
                positive_validation: 50.0,
            });
        }
        assert_eq!((s.lambda_long, s.lambda_short), (1.0, 1.0));
    }
}
