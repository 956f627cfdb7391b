//! Fully connected network with tanh hidden layers and a linear output,
//! stored as one flat parameter vector so optimizers and finite-difference
//! checks can treat it as a plain slice.
//!
//! Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; its weights
//! are laid out row-major (`out x in`) followed by its `out` biases.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`]; `activations[0]` is the
/// input and the last entry is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least input and output")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Invalid("an MLP needs at least two non-empty layers".into()));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.uniform(-limit, limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Multiplies the final layer's weights by `factor`; small output layers
    /// give near-uniform initial policies.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let l = self.sizes.len() - 2;
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.params.len() - fan_in * fan_out - fan_out;
        for p in &mut self.params[start..start + fan_in * fan_out] {
            *p *= factor;
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut act = input.to_vec();
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let next = self.layer(l, &act, &mut offset, l + 1 < layers);
            act = next;
        }
        Ok(act)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let next = self.layer(l, &activations[l], &mut offset, l + 1 < layers);
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    fn layer(&self, l: usize, input: &[f64], offset: &mut usize, hidden: bool) -> Vec<f64> {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let weights = &self.params[*offset..*offset + fan_in * fan_out];
        let bias = &self.params[*offset + fan_in * fan_out..*offset + fan_in * fan_out + fan_out];
        *offset += fan_in * fan_out + fan_out;
        weights
            .chunks_exact(fan_in)
            .zip(bias)
            .map(|(row, b)| {
                let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
                if hidden {
                    math::tanh(z)
                } else {
                    z
                }
            })
            .collect()
    }

    /// Back-propagates `upstream` (dLoss/dOutput) through the cached pass and
    /// adds dLoss/dParams into `grads`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "upstream gradient",
                expected: self.output_dim(),
                found: upstream.len(),
            });
        }
        if grads.len() != self.params.len() || cache.activations.len() != self.sizes.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient buffer",
                expected: self.params.len(),
                found: grads.len(),
            });
        }
        let mut delta = upstream.to_vec();
        let mut end = self.params.len();
        for l in (0..self.sizes.len() - 1).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = end - fan_in * fan_out - fan_out;
            let input = &cache.activations[l];
            {
                let (gw, gb) = grads[start..end].split_at_mut(fan_in * fan_out);
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l > 0 {
                let weights = &self.params[start..start + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                        *p += w * d;
                    }
                }
                // tanh'(z) = 1 - tanh(z)^2
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
            end = start;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_layer_gradient_is_input() {
        let mut rng = SeededRng::new(1);
        let net = Mlp::new(&[3, 1], &mut rng).unwrap();
        let x = [0.5, -1.5, 2.0];
        let cache = net.forward_cached(&x).unwrap();
        let mut g = vec![0.0; net.param_count()];
        net.backward(&cache, &[1.0], &mut g).unwrap();
        assert_eq!(g, vec![0.5, -1.5, 2.0, 1.0]);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = SeededRng::new(2);
        let net = Mlp::new(&[2, 5, 3], &mut rng).unwrap();
        let cache = net.forward_cached(&[0.3, 0.1]).unwrap();
        let mut g = vec![0.0; net.param_count()];
        net.backward(&cache, &[0.0; 3], &mut g).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::zeros(&[2, 3]).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let cache = net.forward_cached(&[1.0, 2.0]).unwrap();
        let mut g = vec![0.0; net.param_count()];
        assert!(net.backward(&cache, &[1.0], &mut g).is_err());
        assert!(Mlp::zeros(&[2]).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = SeededRng::new(3);
        let net = Mlp::new(&[4, 8, 8, 2], &mut rng).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
        assert_eq!(net.forward(&x).unwrap(), net.forward_cached(&x).unwrap().output());
    }
}
