use alloc::vec::Vec;

use super::Parameterized;

/// Gradients smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-4;

/// `|a - b| / max(|a|, |b|, GRAD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Compares a model's analytic gradient with central finite differences.
///
/// `loss` must run the forward pass, accumulate gradients into the model's
/// parameters, and return the scalar loss.
pub fn grad_check<M, F>(model: &mut M, eps: f64, mut loss: F) -> GradCheckReport
where
    M: Parameterized,
    F: FnMut(&mut M) -> f64,
{
    model.zero_grad();
    loss(model);
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for (pi, grads) in analytic.iter().enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let original = model.params()[pi].value[k];
            model.params_mut()[pi].value[k] = original + eps;
            let up = loss(model);
            model.params_mut()[pi].value[k] = original - eps;
            let down = loss(model);
            model.params_mut()[pi].value[k] = original;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * eps)));
            checked += 1;
        }
    }
    model.zero_grad();
    GradCheckReport { max_relative_error: worst, checked }
}

/// Finite-difference check of a plain function returning `(value, gradient)`.
pub fn grad_check_fn<F>(f: F, p0: &[f64], eps: f64) -> GradCheckReport
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(p0);
    let mut p = p0.to_vec();
    let mut worst = 0.0f64;
    for k in 0..p.len() {
        p[k] = p0[k] + eps;
        let up = f(&p).0;
        p[k] = p0[k] - eps;
        let down = f(&p).0;
        p[k] = p0[k];
        worst = worst.max(relative_error(analytic[k], (up - down) / (2.0 * eps)));
    }
    GradCheckReport { max_relative_error: worst, checked: p.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let r = grad_check_fn(|p| (p[0] * p[0], alloc::vec![2.0 * p[0]]), &[3.0], 1e-5);
        assert!(r.max_relative_error < 1e-9, "{r:?}");
    }

    #[test]
    fn catches_a_wrong_gradient() {
        let r = grad_check_fn(|p| (p[0] * p[0], alloc::vec![3.0 * p[0]]), &[3.0], 1e-5);
        assert!(r.max_relative_error > 0.1);
    }
}
