use rand::Rng;

use crate::error::{Error, Result};

/// Dense affine layer, `out = weight · x + bias`. `weight` is row-major
/// `[out_dim, in_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) for weights and biases.
    pub fn uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weight = (0..in_dim * out_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().copied());
        for (o, row) in out.iter_mut().zip(self.weight.chunks_exact(self.in_dim)) {
            *o += row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }
}

/// Feed-forward network: ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer inputs and pre-activations recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.pre_activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parameter count of a `[input, hidden.., output]` network.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Linear::uniform(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.sizes())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "mlp input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&current, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<MlpTrace> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.apply(&current, &mut z);
            let activated = if i < last {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                Vec::new()
            };
            inputs.push(std::mem::replace(&mut current, activated));
            pre_activations.push(z);
        }
        Ok(MlpTrace {
            inputs,
            pre_activations,
        })
    }

    /// Reverse pass: accumulates `∂L/∂params` into `grads` given `∂L/∂output`
    /// and returns `∂L/∂input`.
    pub fn backward(&self, trace: &MlpTrace, d_output: &[f64], grads: &mut Mlp) -> Vec<f64> {
        debug_assert_eq!(d_output.len(), self.output_dim());
        let mut delta = d_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let grad = &mut grads.layers[i];
            let input = &trace.inputs[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad.bias[o] += d;
                let row = &mut grad.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            let mut d_input = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (di, w) in d_input.iter_mut().zip(row) {
                    *di += d * w;
                }
            }
            if i > 0 {
                // ReLU mask of the previous layer's activation
                for (di, z) in d_input.iter_mut().zip(&trace.pre_activations[i - 1]) {
                    if *z <= 0.0 {
                        *di = 0.0;
                    }
                }
            }
            delta = d_input;
        }
        delta
    }

    /// Parameters in layer order: weight then bias for each layer.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_zero_output() {
        let net = Mlp::zeros(&[3, 64, 64, 2]);
        assert_eq!(net.forward(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn count_formula() {
        let net = Mlp::zeros(&[3, 64, 64, 1]);
        assert_eq!(net.param_count(), 3 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
        assert_eq!(net.params().count(), net.param_count());
    }

    #[test]
    fn single_layer_picks_weight_column() {
        let mut net = Mlp::zeros(&[2, 3]);
        net.layers[0].weight = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = net.forward(&[1.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn zero_input_propagates_biases_through_relu() {
        let mut net = Mlp::zeros(&[2, 2, 1]);
        net.layers[0].bias = vec![0.5, -1.0];
        net.layers[1].weight = vec![2.0, 3.0];
        net.layers[1].bias = vec![0.25];
        // relu(0.5)=0.5, relu(-1)=0 → 2·0.5 + 3·0 + 0.25
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap(), vec![1.25]);
    }

    #[test]
    fn wrong_input_length() {
        let net = Mlp::zeros(&[3, 4, 1]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn traced_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::uniform(&[4, 5, 3], &mut rng);
        let x = [0.3, -0.2, 0.9, 1.5];
        assert_eq!(net.forward(&x).unwrap(), net.forward_traced(&x).unwrap().output());
    }
}
