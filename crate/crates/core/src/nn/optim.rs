use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Param;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    AdamW { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adamw() -> Self {
        OptimizerKind::AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// SGD or AdamW with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("learning rate must be positive, got {learning_rate}")));
        }
        if !(weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight decay must be non-negative".into()));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            weight_decay,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate, 0.0)
    }

    pub fn adamw(learning_rate: f64, weight_decay: f64) -> Result<Self> {
        Self::new(OptimizerKind::adamw(), learning_rate, weight_decay)
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        for (i, p) in params.iter().enumerate() {
            if let Some(j) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("gradient of parameter {i} at index {j}")));
            }
        }
        if let OptimizerKind::AdamW { .. } = self.kind {
            if self.first_moment.is_empty() {
                self.first_moment = params.iter().map(|p| alloc::vec![0.0; p.len()]).collect();
                self.second_moment = self.first_moment.clone();
            }
            let matches = self.first_moment.len() == params.len()
                && self.first_moment.iter().zip(params.iter()).all(|(m, p)| m.len() == p.len());
            if !matches {
                return Err(Error::ShapeMismatch {
                    expected: "parameters the optimizer was created with".into(),
                    found: "a different parameter set".into(),
                });
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        let decay = lr * self.weight_decay;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    for (v, g) in p.value.iter_mut().zip(&p.grad) {
                        *v -= decay * *v + lr * g;
                    }
                }
            }
            OptimizerKind::AdamW { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - libm::pow(beta1, t as f64);
                let c2 = 1.0 - libm::pow(beta2, t as f64);
                for ((p, m), s) in params.iter_mut().zip(&mut self.first_moment).zip(&mut self.second_moment) {
                    for k in 0..p.value.len() {
                        let g = p.grad[k];
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                        s[k] = beta2 * s[k] + (1.0 - beta2) * g * g;
                        let m_hat = m[k] / c1;
                        let s_hat = s[k] / c2;
                        p.value[k] -= decay * p.value[k];
                        p.value[k] -= lr * m_hat / (libm::sqrt(s_hat) + eps);
                    }
                }
            }
        }
        for p in params.iter_mut() {
            p.zero_grad();
        }
        Ok(())
    }
}
