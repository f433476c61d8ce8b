use rand::Rng;
use rand_distr::StandardNormal;

use super::adam::AdamState;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> f64 {
        match self {
            Activation::Tanh => 1.0,
            Activation::Identity => 0.0,
        }
    }

    pub(crate) fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            1 => Some(Activation::Tanh),
            0 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One affine layer. `weight` is `out_dim x in_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shaped like the [`Mlp`] they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub log_std: Option<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            log_std: mlp.log_std.as_ref().map(|s| vec![0.0; s.len()]),
        }
    }

    /// Arrays in the canonical parameter order.
    pub fn arrays(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .chain(self.log_std.as_deref())
    }

    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .chain(self.log_std.as_mut())
    }

    pub fn l2_norm(&self) -> f64 {
        self.arrays()
            .flat_map(|a| a.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.arrays_mut() {
            a.iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the norm
    /// measured before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().flat_map(|a| a.iter()).all(|g| g.is_finite())
    }
}

/// Activations recorded during a batched forward pass, consumed by
/// [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    batch: usize,
    /// `outputs[0]` is the input batch, `outputs[k]` is the output of layer `k-1`.
    outputs: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// The network output, `batch x out_dim`.
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("trace always holds the input")
    }
}

/// A multilayer perceptron together with its optimizer state.
///
/// The optional `log_std` vector is the state-independent log standard
/// deviation of a diagonal Gaussian policy head. It is trained by the same
/// Adam instance as the layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub log_std: Option<Vec<f64>>,
    pub adam: AdamState,
}

impl Mlp {
    /// Builds an all-zero network with `sizes = [input, hidden.., output]`.
    pub fn zeros(sizes: &[usize], hidden: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let n = sizes.len() - 1;
        let layers: Vec<Layer> = (0..n)
            .map(|k| {
                let act = if k + 1 == n { Activation::Identity } else { hidden };
                Layer::zeros(sizes[k], sizes[k + 1], act)
            })
            .collect();
        let mut mlp = Self {
            layers,
            log_std: None,
            adam: AdamState::default(),
        };
        mlp.adam = AdamState::zeros_like(&mlp);
        mlp
    }

    /// Random initialisation: weights drawn from `N(0, gain^2 / fan_in)` with
    /// unit gain for hidden layers and `output_gain` for the last layer.
    /// Biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        let mut mlp = Self::zeros(sizes, hidden);
        let last = mlp.layers.len() - 1;
        for (k, layer) in mlp.layers.iter_mut().enumerate() {
            let gain = if k == last { output_gain } else { 1.0 };
            let std = gain / (layer.in_dim as f64).sqrt();
            for w in layer.weight.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = std * z;
            }
        }
        mlp
    }

    /// Attaches a learnable log-std vector (one entry per output) and resets
    /// the optimizer state to match the new parameter set.
    pub fn with_log_std(mut self, init: f64) -> Self {
        self.log_std = Some(vec![init; self.output_dim()]);
        self.adam = AdamState::zeros_like(&self);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.arrays().map(|a| a.len()).sum()
    }

    /// Parameter arrays in canonical order: per layer weight then bias, then
    /// the log-std vector if present.
    pub fn arrays(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .chain(self.log_std.as_deref())
    }

    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .chain(self.log_std.as_mut())
    }

    pub(crate) fn array_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for k in 0..self.layers.len() {
            names.push(format!("layer{k}.weight"));
            names.push(format!("layer{k}.bias"));
        }
        if self.log_std.is_some() {
            names.push("log_std".to_string());
        }
        names
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::Shape {
                context: "mlp forward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut y = layer.bias.clone();
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                *yo += row.iter().zip(&x).map(|(w, xi)| w * xi).sum::<f64>();
                *yo = layer.activation.apply(*yo);
            }
            x = y;
        }
        Ok(x)
    }

    /// Batched forward pass over `batch` row-major samples.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>, NnError> {
        let mut trace = self.forward_trace(inputs, batch)?;
        Ok(trace.outputs.pop().expect("trace always holds the input"))
    }

    pub fn forward_trace(&self, inputs: &[f64], batch: usize) -> Result<ForwardTrace, NnError> {
        if batch == 0 {
            return Err(NnError::EmptyBatch);
        }
        if inputs.len() != batch * self.input_dim() {
            return Err(NnError::Shape {
                context: "mlp batch input",
                expected: batch * self.input_dim(),
                actual: inputs.len(),
            });
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(inputs.to_vec());
        for layer in &self.layers {
            let x = outputs.last().expect("non-empty");
            let mut y = Vec::with_capacity(batch * layer.out_dim);
            for _ in 0..batch {
                y.extend_from_slice(&layer.bias);
            }
            // y (B x out) += x (B x in) . W^T (in x out)
            gemm(
                batch,
                layer.in_dim,
                layer.out_dim,
                1.0,
                x,
                (layer.in_dim, 1),
                &layer.weight,
                (1, layer.in_dim),
                1.0,
                &mut y,
                (layer.out_dim, 1),
            );
            if layer.activation != Activation::Identity {
                y.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            }
            outputs.push(y);
        }
        Ok(ForwardTrace { batch, outputs })
    }

    /// Backpropagates `upstream` (dL/d output for every sample, `batch x
    /// out_dim`) and returns the batch-mean parameter gradient. The log-std
    /// entry, if any, is zero: the network output does not depend on it.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &[f64]) -> Result<Gradients, NnError> {
        let batch = trace.batch;
        let out_dim = self.output_dim();
        if upstream.len() != batch * out_dim {
            return Err(NnError::Shape {
                context: "mlp upstream gradient",
                expected: batch * out_dim,
                actual: upstream.len(),
            });
        }
        if let Some(pos) = upstream.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient {
                index: pos / out_dim,
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let y = &trace.outputs[k + 1];
            if layer.activation != Activation::Identity {
                for (d, &yv) in delta.iter_mut().zip(y) {
                    *d *= layer.activation.derivative_from_output(yv);
                }
            }
            let x = &trace.outputs[k];
            let g = &mut grads.layers[k];
            // dW (out x in) = delta^T (out x B) . x (B x in)
            gemm(
                layer.out_dim,
                batch,
                layer.in_dim,
                1.0,
                &delta,
                (1, layer.out_dim),
                x,
                (layer.in_dim, 1),
                0.0,
                &mut g.weight,
                (layer.in_dim, 1),
            );
            for row in delta.chunks_exact(layer.out_dim) {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if k > 0 {
                // delta_prev (B x in) = delta (B x out) . W (out x in)
                let mut prev = vec![0.0; batch * layer.in_dim];
                gemm(
                    batch,
                    layer.out_dim,
                    layer.in_dim,
                    1.0,
                    &delta,
                    (layer.out_dim, 1),
                    &layer.weight,
                    (layer.in_dim, 1),
                    0.0,
                    &mut prev,
                    (layer.in_dim, 1),
                );
                delta = prev;
            }
        }
        grads.scale(1.0 / batch as f64);
        Ok(grads)
    }

    /// Batch-mean gradient of `sum_o upstream[b, o] * f(x_b)[o]`.
    pub fn gradient(
        &self,
        inputs: &[f64],
        batch: usize,
        upstream: &[f64],
    ) -> Result<Gradients, NnError> {
        let trace = self.forward_trace(inputs, batch)?;
        self.backward(&trace, upstream)
    }

    /// Flat export as ordered `(name, values)` pairs, optimizer state included.
    pub fn export(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![
            (
                "sizes".to_string(),
                self.sizes().iter().map(|&s| s as f64).collect(),
            ),
            (
                "activations".to_string(),
                self.layers.iter().map(|l| l.activation.code()).collect(),
            ),
        ];
        let names = self.array_names();
        for (name, arr) in names.iter().zip(self.arrays()) {
            out.push((name.clone(), arr.to_vec()));
        }
        for (name, m) in names.iter().zip(&self.adam.m) {
            out.push((format!("adam.m.{name}"), m.clone()));
        }
        for (name, v) in names.iter().zip(&self.adam.v) {
            out.push((format!("adam.v.{name}"), v.clone()));
        }
        out.push(("adam.step".to_string(), vec![self.adam.step as f64]));
        out
    }

    /// Inverse of [`Mlp::export`].
    pub fn import(arrays: &[(String, Vec<f64>)]) -> Result<Self, NnError> {
        let get = |name: &str| -> Result<&Vec<f64>, NnError> {
            arrays
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v)
                .ok_or_else(|| NnError::Import(format!("missing array `{name}`")))
        };
        let sizes: Vec<usize> = get("sizes")?.iter().map(|&s| s as usize).collect();
        if sizes.len() < 2 {
            return Err(NnError::Import("need at least two layer sizes".into()));
        }
        let acts = get("activations")?;
        if acts.len() != sizes.len() - 1 {
            return Err(NnError::Import("activation count does not match layers".into()));
        }
        let mut mlp = Self::zeros(&sizes, Activation::Tanh);
        for (layer, &code) in mlp.layers.iter_mut().zip(acts) {
            layer.activation = Activation::from_code(code)
                .ok_or_else(|| NnError::Import(format!("unknown activation code {code}")))?;
        }
        if arrays.iter().any(|(n, _)| n == "log_std") {
            mlp = mlp.with_log_std(0.0);
        }
        let names = mlp.array_names();
        for (name, dst) in names.iter().zip(mlp.arrays_mut()) {
            let src = get(name)?;
            if src.len() != dst.len() {
                return Err(NnError::Import(format!(
                    "array `{name}` has {} values, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(src);
        }
        for (k, name) in names.iter().enumerate() {
            let m = get(&format!("adam.m.{name}"))?;
            let v = get(&format!("adam.v.{name}"))?;
            if m.len() != mlp.adam.m[k].len() || v.len() != mlp.adam.v[k].len() {
                return Err(NnError::Import(format!("adam moments for `{name}` misshaped")));
            }
            mlp.adam.m[k].copy_from_slice(m);
            mlp.adam.v[k].copy_from_slice(v);
        }
        mlp.adam.step = get("adam.step")?.first().copied().unwrap_or(0.0) as u64;
        Ok(mlp)
    }
}

/// Safe wrapper over `matrixmultiply::dgemm`: `C = alpha * A.B + beta * C`
/// where `A` is `m x k`, `B` is `k x n` and strides are `(row, col)`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
    c_strides: (usize, usize),
) {
    let max_index = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= max_index(m, k, a_strides));
    assert!(b.len() >= max_index(k, n, b_strides));
    assert!(c.len() >= max_index(m, n, c_strides));
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            c_strides.0 as isize,
            c_strides.1 as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(&[3, 4, 2], Activation::Tanh);
        assert_eq!(mlp.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let mut mlp = Mlp::zeros(&[1, 1], Activation::Tanh);
        mlp.layers[0].weight = vec![2.0];
        mlp.layers[0].bias = vec![1.0];
        assert_eq!(mlp.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn shape_errors() {
        let mlp = Mlp::zeros(&[3, 2], Activation::Tanh);
        assert!(matches!(
            mlp.forward(&[1.0]),
            Err(NnError::Shape { expected: 3, actual: 1, .. })
        ));
        assert!(matches!(
            mlp.forward_batch(&[1.0; 5], 2),
            Err(NnError::Shape { .. })
        ));
        assert_eq!(mlp.forward_batch(&[], 0), Err(NnError::EmptyBatch));
    }

    #[test]
    fn batch_forward_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::new(&[5, 7, 3], Activation::Tanh, 1.0, &mut rng);
        let inputs: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let batched = mlp.forward_batch(&inputs, 4).unwrap();
        for b in 0..4 {
            let single = mlp.forward(&inputs[b * 5..(b + 1) * 5]).unwrap();
            for o in 0..3 {
                assert!((single[o] - batched[b * 3 + o]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hand_differentiated_scalar_net() {
        // f(x) = tanh(w x) realised as 1 -> 1 tanh layer followed by identity 1 -> 1.
        let mut mlp = Mlp::zeros(&[1, 1, 1], Activation::Tanh);
        mlp.layers[0].weight = vec![0.5];
        mlp.layers[1].weight = vec![1.0];
        let g = mlp.gradient(&[1.0], 1, &[1.0]).unwrap();
        let expected = 1.0 - 0.5f64.tanh().powi(2);
        assert!((g.layers[0].weight[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::new(&[4, 6, 2], Activation::Tanh, 1.0, &mut rng).with_log_std(-0.7);
        let g = mlp.gradient(&[0.3; 8], 2, &[0.0; 4]).unwrap();
        assert!(g.arrays().flat_map(|a| a.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_upstream_names_batch_index() {
        let mlp = Mlp::zeros(&[2, 3, 2], Activation::Tanh);
        let upstream = [0.0, 0.0, 0.0, 0.0, f64::NAN, 1.0];
        assert_eq!(
            mlp.gradient(&[0.0; 6], 3, &upstream),
            Err(NnError::NonFiniteGradient { index: 2 })
        );
    }

    #[test]
    fn export_import_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut mlp = Mlp::new(&[4, 8, 8, 2], Activation::Tanh, 0.01, &mut rng).with_log_std(0.5f64.ln());
        let grads = mlp.gradient(&[0.1; 8], 2, &[1.0, -1.0, 0.5, 0.2]).unwrap();
        mlp.adam_step(&grads, 1e-3).unwrap();
        let back = Mlp::import(&mlp.export()).unwrap();
        assert_eq!(back, mlp);
    }
}
