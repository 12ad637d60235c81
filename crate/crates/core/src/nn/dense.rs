use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{matvec, sigmoid, Param, Parameterized};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::None => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => libm::tanh(z),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    pub activation: Activation,
}

/// Values kept from the forward pass for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Dense { weight: Param::zeros(&[output, input]), bias: Param::zeros(&[output]), activation }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input, output, activation);
        let limit = libm::sqrt(6.0 / (input + output) as f64);
        for w in &mut layer.weight.value {
            *w = rng.gen_range(-limit..limit);
        }
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseCache> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: alloc::format!("input of length {}", self.input_dim()),
                found: alloc::format!("{}", x.len()),
            });
        }
        let mut z = matvec(&self.weight.value, self.output_dim(), self.input_dim(), x);
        for (zi, b) in z.iter_mut().zip(&self.bias.value) {
            *zi = self.activation.apply(*zi + b);
        }
        Ok(DenseCache { input: x.to_vec(), output: z })
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and returns d/dx.
    pub fn backward(&mut self, cache: &DenseCache, dy: &[f64]) -> Vec<f64> {
        let (rows, cols) = (self.output_dim(), self.input_dim());
        let mut dx = alloc::vec![0.0; cols];
        for i in 0..rows {
            let dz = dy[i] * self.activation.derivative(cache.output[i]);
            if dz == 0.0 {
                continue;
            }
            self.bias.grad[i] += dz;
            let w = &self.weight.value[i * cols..(i + 1) * cols];
            let g = &mut self.weight.grad[i * cols..(i + 1) * cols];
            for j in 0..cols {
                g[j] += dz * cache.input[j];
                dx[j] += dz * w[j];
            }
        }
        dx
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&Param> {
        alloc::vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        alloc::vec![&mut self.weight, &mut self.bias]
    }
}
