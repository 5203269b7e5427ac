use rand::Rng;

use super::loss::LossKind;
use crate::error::{Error, Result};

/// Fully connected network with rectifier hidden layers and a linear output.
///
/// All parameters live in one flat vector; layer `l` stores its weights
/// row-major as `outputs × inputs` followed by its `outputs` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// One regression target for the action-value head.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}

struct Trace {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
}

impl DenseNet {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(
                "layer_sizes",
                format!("need at least an input and an output layer of positive width, got {sizes:?}"),
            ));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for pair in sizes.windows(2) {
            offsets.push(total);
            total += pair[0] * pair[1] + pair[1];
        }
        offsets.push(total);
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Weights and biases uniform on `[-1/√fan_in, 1/√fan_in]`.
    pub fn seeded<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for l in 0..net.layer_count() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let (start, end) = (net.offsets[l], net.offsets[l + 1]);
            for p in &mut net.params[start..end] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn copy_from(&mut self, other: &DenseNet) {
        debug_assert_eq!(self.sizes, other.sizes);
        self.params.copy_from_slice(&other.params);
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.offsets[l];
        let (w, b) = self.params[start..start + n_in * n_out + n_out].split_at(n_in * n_out);
        (w, b)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.offsets[l];
        self.params[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: &[f64], out: &mut Vec<f64>) {
        let (w, b) = self.layer(l);
        let n_in = self.sizes[l];
        out.clear();
        out.extend(b.iter().enumerate().map(|(j, &bj)| {
            let row = &w[j * n_in..(j + 1) * n_in];
            bj + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        }));
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layer_count() - 1;
        for l in 0..=last {
            self.affine(l, &current, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    fn forward_trace(&self, x: &[f64]) -> Trace {
        let last = self.layer_count() - 1;
        let mut inputs = Vec::with_capacity(self.layer_count());
        let mut pre = Vec::with_capacity(self.layer_count());
        let mut current = x.to_vec();
        for l in 0..=last {
            let mut z = Vec::new();
            self.affine(l, &current, &mut z);
            let activated = if l < last {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            inputs.push(current);
            pre.push(z);
            current = activated;
        }
        Trace { inputs, pre }
    }

    /// Accumulates `∂(g·output)/∂θ` into `grads` for one input, where
    /// `grad_out` is the gradient of the loss with respect to the output.
    fn backprop(&self, trace: &Trace, grad_out: Vec<f64>, grads: &mut [f64]) {
        let mut upstream = grad_out;
        for l in (0..self.layer_count()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = self.offsets[l];
            let input = &trace.inputs[l];
            {
                let (gw, gb) = grads[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (j, &g) in upstream.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    gb[j] += g;
                    for (gwi, &xi) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
                        *gwi += g * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let below = &trace.pre[l - 1];
            let mut next = vec![0.0; n_in];
            for (j, &g) in upstream.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (ni, &wji) in next.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *ni += g * wji;
                }
            }
            // rectifier derivative, 0 at the kink
            for (ni, &z) in next.iter_mut().zip(below) {
                if z <= 0.0 {
                    *ni = 0.0;
                }
            }
            upstream = next;
        }
    }

    /// Gradient of an arbitrary scalar `Σ_k grad_out[k]·output[k]` at `x`.
    pub fn output_gradient(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if grad_out.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "output gradient",
                expected: self.output_dim(),
                actual: grad_out.len(),
            });
        }
        let mut grads = vec![0.0; self.param_count()];
        self.backprop(&self.forward_trace(x), grad_out.to_vec(), &mut grads);
        Ok(grads)
    }

    /// Loss `mean_i w_i·L(target_i − Q(s_i, a_i))` and its exact gradient
    /// with respect to every parameter. Returns `(loss, grads, deltas)`.
    pub fn backward(
        &self,
        samples: &[Sample<'_>],
        weights: &[f64],
        kind: LossKind,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        if samples.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "sample weights",
                expected: samples.len(),
                actual: weights.len(),
            });
        }
        let mut grads = vec![0.0; self.param_count()];
        if samples.is_empty() {
            return Ok((0.0, grads, Vec::new()));
        }
        let scale = 1.0 / samples.len() as f64;
        let mut loss = 0.0;
        let mut deltas = Vec::with_capacity(samples.len());
        for (s, &w) in samples.iter().zip(weights) {
            self.check_input(s.state)?;
            if s.action >= self.output_dim() {
                return Err(Error::DimensionMismatch {
                    what: "action index",
                    expected: self.output_dim(),
                    actual: s.action,
                });
            }
            let trace = self.forward_trace(s.state);
            let q = trace.pre.last().expect("non-empty network")[s.action];
            let delta = s.target - q;
            let (l, dl) = kind.eval(delta);
            loss += w * l;
            deltas.push(delta);
            // dL/dQ = -w·L'(δ)/m
            let g = -w * dl * scale;
            if g != 0.0 {
                let mut grad_out = vec![0.0; self.output_dim()];
                grad_out[s.action] = g;
                self.backprop(&trace, grad_out, &mut grads);
            }
        }
        Ok((loss * scale, grads, deltas))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::zeros(&[4, 24, 24, 24, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.param_count(), 4 * 24 + 24 + 2 * (24 * 24 + 24) + 24 * 2 + 2);
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut net = DenseNet::zeros(&[3, 3]).unwrap();
        let (w, _) = net.layer_mut(0);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::seeded(&[4, 8, 3], &mut rng).unwrap();
        let x = [0.1, -0.4, 2.0, 0.0];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseNet::zeros(&[3]).is_err());
        assert!(DenseNet::zeros(&[3, 0, 2]).is_err());
        let net = DenseNet::zeros(&[2, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let s = [Sample { state: &[0.0, 0.0], action: 5, target: 0.0 }];
        assert!(net.backward(&s, &[1.0], LossKind::Mse).is_err());
    }

    #[test]
    fn seeded_init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = DenseNet::seeded(&[16, 4, 2], &mut rng).unwrap();
        let (w0, b0) = net.layer(0);
        assert!(w0.iter().chain(b0).all(|v| v.abs() <= 0.25));
        let (w1, b1) = net.layer(1);
        assert!(w1.iter().chain(b1).all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn zero_loss_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = DenseNet::seeded(&[3, 5, 2], &mut rng).unwrap();
        let x = [0.3, -0.2, 0.9];
        let q = net.forward(&x).unwrap();
        let s = [Sample { state: &x, action: 1, target: q[1] }];
        let (loss, grads, _) = net.backward(&s, &[1.0], LossKind::Huber).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn doubling_weights_doubles_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::seeded(&[3, 6, 6, 2], &mut rng).unwrap();
        let xs = [[0.3, -0.2, 0.9], [1.0, 0.5, -0.7]];
        let samples: Vec<Sample> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| Sample { state: x, action: i % 2, target: 2.5 })
            .collect();
        let (_, g1, _) = net.backward(&samples, &[0.3, 0.8], LossKind::Mse).unwrap();
        let (_, g2, _) = net.backward(&samples, &[0.6, 1.6], LossKind::Mse).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = DenseNet::seeded(&[1, 1, 2], &mut rng).unwrap();
        assert_eq!(net.param_count(), 6);
        let x = [0.7];
        let samples = [Sample { state: &x, action: 0, target: 3.0 }];
        let (_, grads, _) = net.backward(&samples, &[1.0], LossKind::Mse).unwrap();
        let h = 1e-5;
        for i in 0..net.param_count() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let lp = plus.backward(&samples, &[1.0], LossKind::Mse).unwrap().0;
            let lm = minus.backward(&samples, &[1.0], LossKind::Mse).unwrap().0;
            let numeric = (lp - lm) / (2.0 * h);
            assert!((numeric - grads[i]).abs() <= 1e-4 * numeric.abs().max(grads[i].abs()).max(1e-6));
        }
    }
}
