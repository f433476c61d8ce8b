use super::RolloutError;

/// How a step relates to the end of its episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// The episode continues at the next index.
    Continue,
    /// True terminal state: no value beyond this step.
    Terminal,
    /// Episode cut by a time limit; bootstrap with the value of the state
    /// that would have followed.
    Truncated { bootstrap: f64 },
}

/// Generalised advantage estimation.
///
/// `delta_t = r_t + gamma * V(s_{t+1}) * (1 - terminal) - V(s_t)` and
/// `A_t = sum_k (gamma * lambda)^k delta_{t+k}` within each episode. Returns
/// `(advantages, return_targets)` with `return = A + V`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    boundaries: &[Boundary],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), RolloutError> {
    let n = rewards.len();
    if values.len() != n || boundaries.len() != n {
        return Err(RolloutError::Boundaries(format!(
            "{} rewards, {} values, {} boundaries",
            n,
            values.len(),
            boundaries.len()
        )));
    }
    if n > 0 && boundaries[n - 1] == Boundary::Continue {
        return Err(RolloutError::Boundaries(
            "the last step must end its episode".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(RolloutError::Boundaries(format!(
            "gamma {gamma} and lambda {lambda} must lie in [0, 1]"
        )));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = match boundaries[t] {
            Boundary::Continue => (values[t + 1], true),
            Boundary::Terminal => (0.0, false),
            Boundary::Truncated { bootstrap } => (bootstrap, false),
        };
        if !carry {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_terminal() {
        let (a, r) = compute_gae(&[1.0], &[0.0], &[Boundary::Terminal], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn lambda_one_zero_values_is_monte_carlo() {
        let rewards = [1.0, -2.0, 0.5, 3.0];
        let b = [
            Boundary::Continue,
            Boundary::Continue,
            Boundary::Continue,
            Boundary::Terminal,
        ];
        let (a, _) = compute_gae(&rewards, &[0.0; 4], &b, 0.9, 1.0).unwrap();
        for t in 0..4 {
            let mc: f64 = (t..4).map(|k| 0.9f64.powi((k - t) as i32) * rewards[k]).sum();
            assert!((a[t] - mc).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_bootstraps() {
        let (a, _) = compute_gae(
            &[1.0],
            &[0.5],
            &[Boundary::Truncated { bootstrap: 2.0 }],
            0.5,
            0.95,
        )
        .unwrap();
        assert_eq!(a, vec![1.0 + 0.5 * 2.0 - 0.5]);
    }

    #[test]
    fn inconsistent_boundaries_rejected() {
        assert!(compute_gae(&[1.0, 1.0], &[0.0], &[Boundary::Terminal], 0.9, 0.9).is_err());
        assert!(compute_gae(&[1.0], &[0.0], &[Boundary::Continue], 0.9, 0.9).is_err());
    }
}
