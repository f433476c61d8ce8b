use rand::Rng;
use rand_distr::StandardNormal;

/// `ln(2 pi)`.
pub const LOG_2PI: f64 = 1.837_877_066_409_345_3;

/// One draw from a diagonal Gaussian policy head.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAction {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Sample before clipping; the log-probability refers to this point.
    pub raw: Vec<f64>,
    /// Sample clipped to `[-1, 1]` per component, as sent to the environment.
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// Log-density of a diagonal Gaussian at `x`.
pub fn log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), log_std.len());
    debug_assert_eq!(mean.len(), x.len());
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), xi)| {
            let z = (xi - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LOG_2PI)).sum()
}

/// Builds the action for a given standard-normal noise vector `z`.
pub fn sample_with_noise(mean: &[f64], log_std: &[f64], z: &[f64]) -> GaussianAction {
    let raw: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .zip(z)
        .map(|((m, ls), zi)| m + ls.exp() * zi)
        .collect();
    let action = raw.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
    GaussianAction {
        mean: mean.to_vec(),
        log_std: log_std.to_vec(),
        log_prob: log_prob(mean, log_std, &raw),
        raw,
        action,
    }
}

pub fn sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> GaussianAction {
    let z: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
    sample_with_noise(mean, log_std, &z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_is_density_at_mean() {
        let a = sample_with_noise(&[0.3, 1.7], &[-0.5, 0.2], &[0.0, 0.0]);
        assert_eq!(a.action, vec![0.3, 1.0]);
        let expected = -(-0.5 + 0.2) - LOG_2PI;
        assert!((a.log_prob - expected).abs() < 1e-15);
    }

    #[test]
    fn unit_gaussian_density() {
        let lp = log_prob(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!((lp - (-1.0 - LOG_2PI)).abs() < 1e-15);
        assert!((LOG_2PI - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn seeded_sampling_is_repeatable() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            sample(&[0.1, -0.2], &[0.5f64.ln(); 2], &mut rng)
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn clipped_action_keeps_raw_log_prob() {
        let a = sample_with_noise(&[0.9, -0.9], &[0.0, 0.0], &[2.0, -2.0]);
        assert_eq!(a.action, vec![1.0, -1.0]);
        assert!((a.log_prob - log_prob(&a.mean, &a.log_std, &a.raw)).abs() == 0.0);
    }
}
