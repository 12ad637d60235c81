//! Minimal differentiable building blocks with hand-written gradients.
//!
//! Every model in the crate is a fixed composite of the pieces here, so
//! backpropagation is written out per composite instead of going through a
//! general autodiff tape.

mod config;
mod dense;
mod gradcheck;
mod optim;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use config::TrainConfig;
pub use dense::{Activation, Dense, DenseCache};
pub use gradcheck::{grad_check, grad_check_fn, relative_error, GradCheckReport};
pub use optim::{Optimizer, OptimizerKind};

use crate::{Error, Result};

/// A parameter tensor stored row-major with its gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamRepr", into = "ParamRepr")]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamRepr {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<ParamRepr> for Param {
    type Error = Error;

    fn try_from(r: ParamRepr) -> Result<Self> {
        let expected: usize = r.shape.iter().product();
        if expected != r.values.len() {
            return Err(Error::ShapeMismatch {
                expected: alloc::format!("{expected} values for shape {:?}", r.shape),
                found: alloc::format!("{}", r.values.len()),
            });
        }
        if r.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter value in checkpoint".into()));
        }
        Ok(Param::from_values(r.shape, r.values))
    }
}

impl From<Param> for ParamRepr {
    fn from(p: Param) -> Self {
        ParamRepr { shape: p.shape, values: p.value }
    }
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param { shape: shape.to_vec(), value: alloc::vec![0.0; n], grad: alloc::vec![0.0; n] }
    }

    pub fn from_values(shape: Vec<usize>, value: Vec<f64>) -> Self {
        let grad = alloc::vec![0.0; value.len()];
        Param { shape, value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Row `i` of a matrix parameter.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.value[i * cols..(i + 1) * cols]
    }
}

/// Anything that owns trainable parameters.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::EmptyInput("softmax of an empty vector"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Pulls a gradient on softmax outputs `p` back to the logits.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - dot)).collect()
}

pub const PROB_FLOOR: f64 = 1e-12;

/// Binary cross-entropy of probability `s` against label `y`, with d loss / d s.
pub fn bce_loss(s: f64, y: f64) -> Result<(f64, f64)> {
    if y != 0.0 && y != 1.0 {
        return Err(Error::InvalidArgument(alloc::format!("label must be 0 or 1, got {y}")));
    }
    let s = s.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let loss = -(y * libm::log(s) + (1.0 - y) * libm::log(1.0 - s));
    let ds = -y / s + (1.0 - y) / (1.0 - s);
    Ok((loss, ds))
}

/// Softmax cross-entropy against class `target`, with gradient on the logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    let p = softmax(logits)?;
    if target >= p.len() {
        return Err(Error::InvalidArgument(alloc::format!("class {target} out of {}", p.len())));
    }
    let loss = -libm::log(p[target].max(PROB_FLOOR));
    let mut grad = p;
    grad[target] -= 1.0;
    Ok((loss, grad))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = M x` for a row-major `rows x cols` matrix.
pub(crate) fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows).map(|i| dot(&m[i * cols..(i + 1) * cols], x)).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), [0.5, 0.5]);
        let p = softmax(&[core::f64::consts::FRAC_1_SQRT_2, 0.0]).unwrap();
        // e^(1/sqrt 2) / (e^(1/sqrt 2) + 1) = 2.0281149816 / 3.0281149816
        assert_abs_diff_eq!(p[0], 0.669_761_549_326_656_9, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.330_238_450_673_343_1, epsilon = 1e-12);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn bce_examples() {
        assert_abs_diff_eq!(bce_loss(0.5, 1.0).unwrap().0, core::f64::consts::LN_2, epsilon = 1e-15);
        assert!(bce_loss(1.0 - 1e-12, 1.0).unwrap().0 < 1e-11);
        assert_abs_diff_eq!(bce_loss(0.9, 0.0).unwrap().0, 2.302_585_092_994_046, epsilon = 1e-12);
        assert!(bce_loss(0.5, 0.5).is_err());
    }

    #[test]
    fn bce_gradient_matches_finite_difference() {
        for &(s, y) in &[(0.3, 1.0), (0.8, 0.0), (0.55, 1.0)] {
            let (_, ds) = bce_loss(s, y).unwrap();
            let h = 1e-6;
            let num = (bce_loss(s + h, y).unwrap().0 - bce_loss(s - h, y).unwrap().0) / (2.0 * h);
            assert!(relative_error(ds, num) < 1e-7);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn param_checkpoint_validates_shape() {
        let p: Param = serde_json_like_roundtrip();
        assert_eq!(p.grad, [0.0; 4]);
    }

    fn serde_json_like_roundtrip() -> Param {
        let repr = ParamRepr { shape: alloc::vec![2, 2], values: alloc::vec![1.0, 2.0, 3.0, 4.0] };
        let bad = ParamRepr { shape: alloc::vec![3], values: alloc::vec![1.0] };
        assert!(Param::try_from(bad).is_err());
        Param::try_from(repr).unwrap()
    }
}
