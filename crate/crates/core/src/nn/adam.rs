use super::mlp::{Gradients, Mlp};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter array.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        let m: Vec<Vec<f64>> = mlp.arrays().map(|a| vec![0.0; a.len()]).collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }
}

impl Mlp {
    /// One Adam step with bias correction and the default moment constants.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) -> Result<(), NnError> {
        self.adam_step_with(grads, lr, AdamConfig::default())
    }

    /// One Adam step. The update is applied atomically: if any resulting
    /// parameter would be non-finite, nothing is modified and the offending
    /// entry is reported.
    pub fn adam_step_with(
        &mut self,
        grads: &Gradients,
        lr: f64,
        cfg: AdamConfig,
    ) -> Result<(), NnError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NnError::LearningRate(lr));
        }
        let shapes_match = grads.arrays().count() == self.arrays().count()
            && grads
                .arrays()
                .zip(self.arrays())
                .all(|(g, p)| g.len() == p.len());
        if !shapes_match {
            return Err(NnError::Shape {
                context: "adam gradient layout",
                expected: self.parameter_count(),
                actual: grads.arrays().map(|a| a.len()).sum(),
            });
        }
        let step = self.adam.step + 1;
        let bc1 = 1.0 - cfg.beta1.powi(step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(step as i32);

        let mut new_m = self.adam.m.clone();
        let mut new_v = self.adam.v.clone();
        let mut new_p: Vec<Vec<f64>> = self.arrays().map(|a| a.to_vec()).collect();
        let names = self.array_names();
        for (k, g) in grads.arrays().enumerate() {
            for (i, &gi) in g.iter().enumerate() {
                let m = cfg.beta1 * new_m[k][i] + (1.0 - cfg.beta1) * gi;
                let v = cfg.beta2 * new_v[k][i] + (1.0 - cfg.beta2) * gi * gi;
                new_m[k][i] = m;
                new_v[k][i] = v;
                let p = new_p[k][i] - lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
                if !p.is_finite() {
                    return Err(NnError::NonFiniteParameter {
                        array: names[k].clone(),
                        offset: i,
                        value: p,
                    });
                }
                new_p[k][i] = p;
            }
        }
        for (dst, src) in self.arrays_mut().zip(new_p) {
            *dst = src;
        }
        self.adam.m = new_m;
        self.adam.v = new_v;
        self.adam.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        Mlp::new(&[3, 4, 2], Activation::Tanh, 1.0, &mut rng).with_log_std(0.5f64.ln())
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut mlp = net();
        let before = mlp.clone();
        mlp.adam_step(&Gradients::zeros_like(&before), 3e-4).unwrap();
        assert_eq!(mlp.layers, before.layers);
        assert_eq!(mlp.log_std, before.log_std);
        assert_eq!(mlp.adam.m, before.adam.m);
        assert_eq!(mlp.adam.v, before.adam.v);
        assert_eq!(mlp.adam.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut mlp = net();
        let before = mlp.clone();
        let mut grads = Gradients::zeros_like(&mlp);
        for (k, a) in grads.arrays_mut().enumerate() {
            for (i, g) in a.iter_mut().enumerate() {
                *g = if (i + k) % 2 == 0 { 0.3 + i as f64 } else { -2.0 };
            }
        }
        let lr = 1e-3;
        mlp.adam_step(&grads, lr).unwrap();
        for ((p1, p0), g) in mlp.arrays().zip(before.arrays()).zip(grads.arrays()) {
            for ((a, b), gi) in p1.iter().zip(p0).zip(g) {
                assert!(((b - a) - lr * gi.signum()).abs() < 1e-6 * lr.max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_learning_rate_and_non_finite_results() {
        let mut mlp = net();
        let grads = Gradients::zeros_like(&mlp);
        assert_eq!(mlp.adam_step(&grads, 0.0), Err(NnError::LearningRate(0.0)));
        let mut bad = grads.clone();
        bad.layers[0].weight[0] = f64::INFINITY;
        let before = mlp.clone();
        assert!(matches!(
            mlp.adam_step(&bad, 1e-3),
            Err(NnError::NonFiniteParameter { .. })
        ));
        assert_eq!(mlp, before);
    }
}
